use std::sync::Arc;
use std::time::Instant;

use serde::Deserialize;
use serde_json::json;

use super::{BackendError, ChatBackend, ChatRequest, ChatResponse};
use crate::http::{HttpRequest, HttpTransport, TransportError};

/// Environment variable holding the bearer token for the remote endpoint.
pub const API_KEY_ENV: &str = "EA_REFINE_API_KEY";

/// Any server speaking the OpenAI chat-completions protocol.
pub struct OpenAiCompatibleBackend {
    base_url: String,
    api_key: Option<String>,
    transport: Arc<dyn HttpTransport>,
}

impl std::fmt::Debug for OpenAiCompatibleBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OpenAiCompatibleBackend")
            .field("base_url", &self.base_url)
            .field("has_api_key", &self.api_key.is_some())
            .finish()
    }
}

#[derive(Debug, Deserialize)]
struct CompletionBody {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<Usage>,
}

#[derive(Debug, Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Debug, Deserialize)]
struct Message {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
struct Usage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

impl OpenAiCompatibleBackend {
    pub fn new(
        base_url: impl Into<String>,
        api_key: Option<String>,
        transport: Arc<dyn HttpTransport>,
    ) -> Self {
        OpenAiCompatibleBackend {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            api_key,
            transport,
        }
    }

    /// Reads the key from [`API_KEY_ENV`].
    pub fn from_env(base_url: impl Into<String>, transport: Arc<dyn HttpTransport>) -> Self {
        let key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        Self::new(base_url, key, transport)
    }

    pub fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.base_url)
    }

    pub fn request_body(request: &ChatRequest) -> serde_json::Value {
        json!({
            "model": request.model_id,
            "messages": [
                {"role": "system", "content": request.system_text},
                {"role": "user", "content": request.user_text},
            ],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        })
    }
}

impl ChatBackend for OpenAiCompatibleBackend {
    fn send(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        let mut http = HttpRequest::post_json(self.endpoint(), &Self::request_body(request));
        if let Some(key) = &self.api_key {
            http = http.header("Authorization", format!("Bearer {key}"));
        }
        let started = Instant::now();
        let resp = self.transport.execute(&http).map_err(|e| match e {
            TransportError::Timeout => BackendError::Timeout,
            TransportError::Connection(msg) => BackendError::Transient(msg),
            TransportError::Offline => BackendError::Permanent("network access is disabled".into()),
        })?;
        let latency_ms = started.elapsed().as_millis() as u64;

        match resp.status {
            200..=299 => {}
            429 => {
                return Err(BackendError::RateLimited {
                    retry_after: resp.retry_after(),
                })
            }
            408 | 500..=599 => {
                return Err(BackendError::Transient(format!("HTTP {}", resp.status)));
            }
            status => {
                return Err(BackendError::Permanent(format!(
                    "HTTP {status}: {}",
                    resp.body
                )));
            }
        }

        let body: CompletionBody = serde_json::from_str(&resp.body)
            .map_err(|e| BackendError::Permanent(format!("malformed completion body: {e}")))?;
        let text = body
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| BackendError::Permanent("completion has no message content".into()))?;
        let usage = body.usage.unwrap_or_default();
        Ok(ChatResponse {
            text,
            prompt_tokens: usage.prompt_tokens,
            completion_tokens: usage.completion_tokens,
            latency_ms,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::http::HttpResponse;
    use crate::llm::{PromptFamily, RequestTag};
    use std::sync::Mutex;

    struct Capture {
        reply: HttpResponse,
        seen: Mutex<Vec<HttpRequest>>,
    }

    impl HttpTransport for Capture {
        fn execute(&self, req: &HttpRequest) -> Result<HttpResponse, TransportError> {
            self.seen.lock().unwrap().push(req.clone());
            Ok(self.reply.clone())
        }
    }

    fn capture(status: u16, body: &str) -> Arc<Capture> {
        Arc::new(Capture {
            reply: HttpResponse::new(status, body),
            seen: Mutex::new(vec![]),
        })
    }

    fn request() -> ChatRequest {
        ChatRequest::new(
            "be precise",
            "translate this",
            "gpt-4o",
            RequestTag::new("i1", PromptFamily::Generation, 0),
        )
    }

    #[test]
    fn posts_chat_completions_shape() {
        let t = capture(
            200,
            r#"{"choices":[{"message":{"role":"assistant","content":"번역"}}],"usage":{"prompt_tokens":12,"completion_tokens":3}}"#,
        );
        let backend =
            OpenAiCompatibleBackend::new("http://llm/v1/", Some("sk-test".into()), t.clone());
        let resp = backend.send(&request()).unwrap();
        assert_eq!(resp.text, "번역");
        assert_eq!((resp.prompt_tokens, resp.completion_tokens), (12, 3));

        let seen = t.seen.lock().unwrap();
        assert_eq!(seen[0].url, "http://llm/v1/chat/completions");
        assert!(seen[0]
            .headers
            .iter()
            .any(|(k, v)| k == "Authorization" && v == "Bearer sk-test"));
        let body: serde_json::Value =
            serde_json::from_slice(seen[0].body.as_ref().unwrap()).unwrap();
        assert_eq!(body["model"], "gpt-4o");
        assert_eq!(body["messages"][0]["role"], "system");
        assert_eq!(body["messages"][1]["content"], "translate this");
        assert_eq!(body["temperature"], 0.0);
        assert_eq!(body["max_tokens"], 1024);
    }

    #[test]
    fn status_classification() {
        let send = |status| {
            OpenAiCompatibleBackend::new("http://llm", None, capture(status, "{}")).send(&request())
        };
        assert!(matches!(send(429), Err(BackendError::RateLimited { .. })));
        assert!(matches!(send(503), Err(BackendError::Transient(_))));
        assert!(matches!(send(401), Err(BackendError::Permanent(_))));
        assert!(matches!(send(200), Err(BackendError::Permanent(_))));
    }
}
