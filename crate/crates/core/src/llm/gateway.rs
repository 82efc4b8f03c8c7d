use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use serde::Serialize;

use super::{BackendError, ChatBackend, ChatRequest, ChatResponse, RequestTag};
use crate::retry::{Backoff, RetryPolicy};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GatewayError {
    #[error("request timed out after {attempts} attempts")]
    Timeout { attempts: u32 },
    #[error("transient failure after {attempts} attempts: {cause}")]
    TransientFailure { attempts: u32, cause: String },
    #[error("permanent failure: {0}")]
    PermanentFailure(String),
    #[error("rate limited after {attempts} attempts")]
    RateLimited { attempts: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TranscriptEntry {
    pub tag: RequestTag,
    pub attempt: u32,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub system: String,
    pub user: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub response: Option<ChatResponse>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Append-only log of every attempt, in issuance order.
#[derive(Debug, Default)]
pub struct Transcript {
    entries: Mutex<Vec<TranscriptEntry>>,
}

impl Transcript {
    fn append(&self, entry: TranscriptEntry) {
        self.entries.lock().expect("transcript lock").push(entry);
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("transcript lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn entries(&self) -> Vec<TranscriptEntry> {
        self.entries.lock().expect("transcript lock").clone()
    }

    pub fn entries_for(&self, instance_id: &str) -> Vec<TranscriptEntry> {
        self.entries
            .lock()
            .expect("transcript lock")
            .iter()
            .filter(|e| e.tag.instance_id == instance_id)
            .cloned()
            .collect()
    }

    /// JSONL with entries grouped by instance following `instance_order`.
    ///
    /// Within an instance entries keep issuance order, which is causal, so
    /// the output does not depend on how instances were interleaved.
    /// Entries for ids not in `instance_order` come last.
    pub fn to_jsonl(&self, instance_order: &[String]) -> String {
        let rank: HashMap<&str, usize> = instance_order
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        let mut entries = self.entries();
        entries.sort_by_key(|e| {
            rank.get(e.tag.instance_id.as_str())
                .copied()
                .unwrap_or(usize::MAX)
        });
        let mut out = String::new();
        for e in entries {
            out.push_str(&serde_json::to_string(&e).expect("transcript entry serializes"));
            out.push('\n');
        }
        out
    }
}

pub struct Gateway {
    backend: Arc<dyn ChatBackend>,
    backoff: Backoff,
    transcript: Transcript,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("policy", self.backoff.policy())
            .field("transcript_len", &self.transcript.len())
            .finish_non_exhaustive()
    }
}

impl Gateway {
    pub fn new(backend: Arc<dyn ChatBackend>, policy: RetryPolicy, seed: u64) -> Self {
        Gateway {
            backend,
            backoff: Backoff::new(policy, seed),
            transcript: Transcript::default(),
        }
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        let max_attempts = self.backoff.policy().max_attempts.max(1);
        let mut attempt = 0;
        loop {
            attempt += 1;
            let outcome = self.backend.send(request);
            self.transcript.append(TranscriptEntry {
                tag: request.tag.clone(),
                attempt,
                model: request.model_id.clone(),
                temperature: request.temperature,
                max_tokens: request.max_tokens,
                system: request.system_text.clone(),
                user: request.user_text.clone(),
                response: outcome.as_ref().ok().cloned(),
                error: outcome.as_ref().err().map(ToString::to_string),
            });
            let (hint, failure) = match outcome {
                Ok(response) => return Ok(response),
                Err(BackendError::Permanent(msg)) => {
                    return Err(GatewayError::PermanentFailure(msg));
                }
                Err(BackendError::Timeout) => (None, GatewayError::Timeout { attempts: attempt }),
                Err(BackendError::Transient(cause)) => (
                    None,
                    GatewayError::TransientFailure {
                        attempts: attempt,
                        cause,
                    },
                ),
                Err(BackendError::RateLimited { retry_after }) => {
                    (retry_after, GatewayError::RateLimited { attempts: attempt })
                }
            };
            if attempt >= max_attempts {
                return Err(failure);
            }
            let waited = self.backoff.sleep(attempt, hint);
            log::debug!(
                "{}: retry {attempt} after {waited:?} ({failure})",
                request.tag
            );
        }
    }

    /// Completes `requests` with at most `parallelism` in flight. Results
    /// line up index-for-index with the input; one failure never aborts
    /// the rest.
    pub fn complete_batch(
        &self,
        requests: &[ChatRequest],
        parallelism: usize,
    ) -> Vec<Result<ChatResponse, GatewayError>> {
        run_ordered(requests, parallelism, |req| self.complete(req))
    }
}

/// Runs `work` over `items` on a bounded pool of scoped threads and returns
/// results in input order.
pub fn run_ordered<T, R, F>(items: &[T], parallelism: usize, work: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    assert!(parallelism >= 1, "parallelism must be at least 1");
    if parallelism == 1 || items.len() <= 1 {
        return items.iter().map(&work).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<R>>> = items.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..parallelism.min(items.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(item) = items.get(i) else { break };
                let result = work(item);
                *slots[i].lock().expect("result slot lock") = Some(result);
            });
        }
    });
    slots
        .into_iter()
        .map(|s| {
            s.into_inner()
                .expect("result slot lock")
                .expect("every slot filled")
        })
        .collect()
}
