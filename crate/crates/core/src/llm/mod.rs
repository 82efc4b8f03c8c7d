//! Chat-completion gateway over interchangeable backends.

mod gateway;
mod mock;
mod remote;

use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use gateway::{run_ordered, Gateway, GatewayError, Transcript, TranscriptEntry};
pub use mock::{MockBackend, MockMode, MockScriptError, ScriptStep, StepAction};
pub use remote::{OpenAiCompatibleBackend, API_KEY_ENV};

/// Which prompt family a request belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptFamily {
    Generation,
    Feedback,
    Refinement,
    FewshotGeneration,
}

impl PromptFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            PromptFamily::Generation => "generation",
            PromptFamily::Feedback => "feedback",
            PromptFamily::Refinement => "refinement",
            PromptFamily::FewshotGeneration => "fewshot_generation",
        }
    }
}

impl fmt::Display for PromptFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Correlates a request with its instance and loop position in transcripts.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RequestTag {
    pub instance_id: String,
    pub family: PromptFamily,
    /// Index of the candidate the request concerns (0 for the initial one).
    pub step: u32,
}

impl RequestTag {
    pub fn new(instance_id: impl Into<String>, family: PromptFamily, step: u32) -> Self {
        RequestTag {
            instance_id: instance_id.into(),
            family,
            step,
        }
    }
}

impl fmt::Display for RequestTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.instance_id, self.family, self.step)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub system_text: String,
    pub user_text: String,
    pub model_id: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub tag: RequestTag,
}

impl ChatRequest {
    pub const DEFAULT_MAX_TOKENS: u32 = 1024;

    /// Temperature 0 and the default token budget.
    pub fn new(
        system_text: impl Into<String>,
        user_text: impl Into<String>,
        model_id: impl Into<String>,
        tag: RequestTag,
    ) -> Self {
        ChatRequest {
            system_text: system_text.into(),
            user_text: user_text.into(),
            model_id: model_id.into(),
            temperature: 0.0,
            max_tokens: Self::DEFAULT_MAX_TOKENS,
            tag,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub latency_ms: u64,
}

/// Failure of a single backend attempt.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BackendError {
    #[error("request timed out")]
    Timeout,
    #[error("transient failure: {0}")]
    Transient(String),
    #[error("permanent failure: {0}")]
    Permanent(String),
    #[error("rate limited")]
    RateLimited { retry_after: Option<Duration> },
}

/// One completion attempt. Retries live in [`Gateway`].
pub trait ChatBackend: Send + Sync {
    fn send(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError>;
}

impl<T: ChatBackend + ?Sized> ChatBackend for std::sync::Arc<T> {
    fn send(&self, request: &ChatRequest) -> Result<ChatResponse, BackendError> {
        (**self).send(request)
    }
}
