//! Deterministic scripted backend.
//!
//! Script files are JSONL, one step per line:
//!
//! ```text
//! {"text": "위대한 개츠비는 몇 년도에 출판되었나요?"}
//! {"error": "transient", "message": "502"}
//! {"text": "...", "delay_ms": 20}
//! {"instance": "ko-1", "family": "feedback", "text": "..."}
//! ```
//!
//! In FIFO mode steps are served in file order regardless of request. In
//! keyed mode each `(instance, family)` pair owns its own queue, so the
//! outcome does not depend on how instances interleave.

use std::collections::{HashMap, VecDeque};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::Deserialize;

use super::{BackendError, ChatBackend, ChatRequest, ChatResponse, PromptFamily};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MockMode {
    Fifo,
    Keyed,
}

impl std::str::FromStr for MockMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fifo" => Ok(MockMode::Fifo),
            "keyed" => Ok(MockMode::Keyed),
            other => Err(format!(
                "unknown mock mode `{other}` (expected fifo or keyed)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StepAction {
    Reply(String),
    Fail(BackendError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScriptStep {
    pub action: StepAction,
    pub delay: Duration,
}

impl ScriptStep {
    pub fn reply(text: impl Into<String>) -> Self {
        ScriptStep {
            action: StepAction::Reply(text.into()),
            delay: Duration::ZERO,
        }
    }

    pub fn transient(msg: impl Into<String>) -> Self {
        Self::fail(BackendError::Transient(msg.into()))
    }

    pub fn permanent(msg: impl Into<String>) -> Self {
        Self::fail(BackendError::Permanent(msg.into()))
    }

    pub fn timeout() -> Self {
        Self::fail(BackendError::Timeout)
    }

    pub fn fail(error: BackendError) -> Self {
        ScriptStep {
            action: StepAction::Fail(error),
            delay: Duration::ZERO,
        }
    }

    pub fn with_delay(mut self, millis: u64) -> Self {
        self.delay = Duration::from_millis(millis);
        self
    }
}

#[derive(Debug, thiserror::Error)]
pub enum MockScriptError {
    #[error("cannot read mock script: {0}")]
    Io(#[from] std::io::Error),
    #[error("mock script line {line}: {cause}")]
    Line { line: usize, cause: String },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStep {
    #[serde(default)]
    instance: Option<String>,
    #[serde(default)]
    family: Option<PromptFamily>,
    #[serde(default)]
    text: Option<String>,
    #[serde(default)]
    error: Option<String>,
    #[serde(default)]
    message: Option<String>,
    #[serde(default)]
    retry_after_ms: Option<u64>,
    #[serde(default)]
    delay_ms: u64,
}

impl RawStep {
    fn into_step(self) -> Result<ScriptStep, String> {
        let action = match (self.text, self.error.as_deref()) {
            (Some(text), None) => StepAction::Reply(text),
            (None, Some(kind)) => {
                let msg = self.message.unwrap_or_else(|| kind.to_string());
                StepAction::Fail(match kind {
                    "transient" => BackendError::Transient(msg),
                    "permanent" => BackendError::Permanent(msg),
                    "timeout" => BackendError::Timeout,
                    "rate_limited" => BackendError::RateLimited {
                        retry_after: self.retry_after_ms.map(Duration::from_millis),
                    },
                    other => return Err(format!("unknown error kind `{other}`")),
                })
            }
            _ => return Err("exactly one of `text` or `error` is required".into()),
        };
        Ok(ScriptStep {
            action,
            delay: Duration::from_millis(self.delay_ms),
        })
    }
}

type Key = (String, PromptFamily);

#[derive(Debug)]
enum Queues {
    Fifo(VecDeque<ScriptStep>),
    Keyed(HashMap<Key, VecDeque<ScriptStep>>),
}

#[derive(Debug)]
pub struct MockBackend {
    queues: Mutex<Queues>,
    calls: AtomicUsize,
    in_flight: AtomicUsize,
    max_in_flight: AtomicUsize,
}

impl MockBackend {
    fn with_queues(queues: Queues) -> Self {
        MockBackend {
            queues: Mutex::new(queues),
            calls: AtomicUsize::new(0),
            in_flight: AtomicUsize::new(0),
            max_in_flight: AtomicUsize::new(0),
        }
    }

    pub fn fifo(steps: Vec<ScriptStep>) -> Self {
        Self::with_queues(Queues::Fifo(steps.into()))
    }

    pub fn keyed_empty() -> Self {
        Self::with_queues(Queues::Keyed(HashMap::new()))
    }

    /// Appends a step to the `(instance, family)` queue. Panics in FIFO mode.
    pub fn push_keyed(&mut self, instance: &str, family: PromptFamily, step: ScriptStep) {
        match self.queues.get_mut().expect("mock queue lock") {
            Queues::Keyed(map) => map
                .entry((instance.to_string(), family))
                .or_default()
                .push_back(step),
            Queues::Fifo(_) => panic!("push_keyed on a FIFO mock"),
        }
    }

    pub fn from_jsonl(text: &str, mode: MockMode) -> Result<Self, MockScriptError> {
        let mut mock = match mode {
            MockMode::Fifo => Self::fifo(Vec::new()),
            MockMode::Keyed => Self::keyed_empty(),
        };
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let err = |cause: String| MockScriptError::Line {
                line: idx + 1,
                cause,
            };
            let raw: RawStep = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
            let key = match (&raw.instance, raw.family) {
                (Some(i), Some(f)) => Some((i.clone(), f)),
                (None, None) => None,
                _ => return Err(err("`instance` and `family` must appear together".into())),
            };
            let step = raw.into_step().map_err(err)?;
            match (mock.queues.get_mut().expect("mock queue lock"), key) {
                (Queues::Fifo(q), _) => q.push_back(step),
                (Queues::Keyed(map), Some(key)) => map.entry(key).or_default().push_back(step),
                (Queues::Keyed(_), None) => {
                    return Err(err("keyed mode requires `instance` and `family`".into()));
                }
            }
        }
        Ok(mock)
    }

    pub fn from_file(path: &Path, mode: MockMode) -> Result<Self, MockScriptError> {
        Self::from_jsonl(&std::fs::read_to_string(path)?, mode)
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn max_in_flight(&self) -> usize {
        self.max_in_flight.load(Ordering::SeqCst)
    }

    /// Steps not yet consumed, across all queues.
    pub fn remaining(&self) -> usize {
        match &*self.queues.lock().expect("mock queue lock") {
            Queues::Fifo(q) => q.len(),
            Queues::Keyed(map) => map.values().map(VecDeque::len).sum(),
        }
    }

    fn next_step(&self, request: &ChatRequest) -> Option<ScriptStep> {
        match &mut *self.queues.lock().expect("mock queue lock") {
            Queues::Fifo(q) => q.pop_front(),
            Queues::Keyed(map) => map
                .get_mut(&(request.tag.instance_id.clone(), request.tag.family))
                .and_then(VecDeque::pop_front),
        }
    }
}

fn word_count(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}

impl ChatBackend for MockBackend {
    fn send(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        self.max_in_flight.fetch_max(now, Ordering::SeqCst);

        let step = self.next_step(request);
        if let Some(step) = &step {
            if !step.delay.is_zero() {
                std::thread::sleep(step.delay);
            }
        }
        self.in_flight.fetch_sub(1, Ordering::SeqCst);

        let step = step.ok_or_else(|| BackendError::Permanent("script exhausted".into()))?;
        match step.action {
            StepAction::Reply(text) => Ok(ChatResponse {
                prompt_tokens: word_count(&request.system_text) + word_count(&request.user_text),
                completion_tokens: word_count(&text),
                // scripted delay, not wall time, so transcripts replay exactly
                latency_ms: step.delay.as_millis() as u64,
                text,
            }),
            StepAction::Fail(e) => Err(e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::RequestTag;

    fn req(instance: &str, family: PromptFamily) -> ChatRequest {
        ChatRequest::new("s", "u", "m", RequestTag::new(instance, family, 0))
    }

    #[test]
    fn parses_fifo_script() {
        let text = r#"{"text":"a"}
{"error":"transient","message":"502"}

{"error":"rate_limited","retry_after_ms":1500}
{"text":"b","delay_ms":3}"#;
        let mock = MockBackend::from_jsonl(text, MockMode::Fifo).unwrap();
        assert_eq!(mock.remaining(), 4);
        let r = req("x", PromptFamily::Generation);
        assert_eq!(mock.send(&r).unwrap().text, "a");
        assert_eq!(mock.send(&r), Err(BackendError::Transient("502".into())));
        assert_eq!(
            mock.send(&r),
            Err(BackendError::RateLimited {
                retry_after: Some(Duration::from_millis(1500))
            })
        );
        assert_eq!(mock.send(&r).unwrap().latency_ms, 3);
    }

    #[test]
    fn keyed_queues_are_independent() {
        let text = r#"{"instance":"a","family":"generation","text":"a0"}
{"instance":"b","family":"generation","text":"b0"}
{"instance":"a","family":"feedback","text":"a-fb"}"#;
        let mock = MockBackend::from_jsonl(text, MockMode::Keyed).unwrap();
        assert_eq!(
            mock.send(&req("b", PromptFamily::Generation)).unwrap().text,
            "b0"
        );
        assert_eq!(
            mock.send(&req("a", PromptFamily::Feedback)).unwrap().text,
            "a-fb"
        );
        assert_eq!(
            mock.send(&req("a", PromptFamily::Generation)).unwrap().text,
            "a0"
        );
        assert!(mock.send(&req("a", PromptFamily::Generation)).is_err());
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(
            MockBackend::from_jsonl(r#"{"text":"a","error":"timeout"}"#, MockMode::Fifo).is_err()
        );
        assert!(MockBackend::from_jsonl(r#"{"error":"bogus"}"#, MockMode::Fifo).is_err());
        assert!(MockBackend::from_jsonl(r#"{"text":"a"}"#, MockMode::Keyed).is_err());
        assert!(
            MockBackend::from_jsonl(r#"{"instance":"a","text":"a"}"#, MockMode::Keyed).is_err()
        );
    }
}
