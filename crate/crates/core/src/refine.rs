//! The generate → feedback → refine loop.
//!
//! One loop makes an initial translation, asks the model to score it, and
//! while the score is below 10 and the refinement budget remains, asks for
//! a revision conditioned on every earlier (candidate, feedback) pair. The
//! newest candidate is always scored too, so the final pick can compare
//! every candidate.

use serde::{Deserialize, Serialize};

use crate::corpus::TaskInstance;
use crate::feedback::{parse_feedback, Feedback};
use crate::llm::{ChatRequest, Gateway, GatewayError, PromptFamily, RequestTag};
use crate::prompt::{PromptBundle, PromptError, PromptKit};
use crate::wikidata::EntityRecord;

pub use crate::feedback::PERFECT_TOTAL;

/// Appended to the feedback prompt when the previous answer did not parse.
pub const FORMAT_REMINDER: &str = "Your previous answer did not follow the required format. Reply with exactly these three lines and nothing else:\nEntity Accuracy: <0-5>/5\nTranslation Quality: <0-5>/5\nComments: <text>";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decoding {
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for Decoding {
    fn default() -> Self {
        Decoding {
            temperature: 0.0,
            max_tokens: ChatRequest::DEFAULT_MAX_TOKENS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineConfig {
    pub max_refinements: u32,
    pub feedback_retry_limit: u32,
    pub model_id: String,
    pub generation: Decoding,
    pub feedback: Decoding,
    pub refinement: Decoding,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig {
            max_refinements: 2,
            feedback_retry_limit: 1,
            model_id: "gpt-4o".into(),
            generation: Decoding::default(),
            feedback: Decoding::default(),
            refinement: Decoding::default(),
        }
    }
}

impl RefineConfig {
    fn decoding(&self, family: PromptFamily) -> Decoding {
        match family {
            PromptFamily::Feedback => self.feedback,
            PromptFamily::Refinement => self.refinement,
            _ => self.generation,
        }
    }

    /// Upper bound on LLM calls for one loop.
    pub fn call_budget(&self) -> u32 {
        let feedback_calls = 1 + self.feedback_retry_limit;
        1 + feedback_calls + self.max_refinements * (1 + feedback_calls)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    PerfectScore,
    MaxRefinements,
    FeedbackFailure,
    /// The loop could not continue because generation or refinement failed.
    InstanceFailure,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::PerfectScore => "perfect_score",
            StopReason::MaxRefinements => "max_refinements",
            StopReason::FeedbackFailure => "feedback_failure",
            StopReason::InstanceFailure => "instance_failure",
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RefineError {
    #[error("instance failure: {0}")]
    InstanceFailure(String),
    #[error("no well-formed feedback after {calls} attempts: {last}")]
    FeedbackFailure { calls: u32, last: String },
    #[error("precondition violated: {0}")]
    Precondition(&'static str),
}

impl From<PromptError> for RefineError {
    fn from(e: PromptError) -> Self {
        RefineError::InstanceFailure(e.to_string())
    }
}

impl From<GatewayError> for RefineError {
    fn from(e: GatewayError) -> Self {
        RefineError::InstanceFailure(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolicitedFeedback {
    pub feedback: Feedback,
    pub calls: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefineResult {
    pub final_translation: String,
    /// Every candidate in generation order; `candidates[0]` is the initial one.
    pub candidates: Vec<String>,
    /// `feedbacks[i]` scores `candidates[i]`. Shorter than `candidates` by
    /// one when feedback for the newest candidate failed.
    pub feedbacks: Vec<Feedback>,
    pub stop_reason: StopReason,
    pub llm_calls: u32,
    pub refinements_done: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RefineResult {
    /// Scored (candidate, feedback) pairs.
    pub fn history(&self) -> Vec<(String, Feedback)> {
        self.candidates
            .iter()
            .cloned()
            .zip(self.feedbacks.iter().cloned())
            .collect()
    }

    pub fn final_feedback(&self) -> Option<&Feedback> {
        let idx = self
            .candidates
            .iter()
            .rposition(|c| *c == self.final_translation)?;
        self.feedbacks.get(idx)
    }
}

/// Per-instance provenance as persisted alongside predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceRecord {
    pub id: String,
    pub candidates: Vec<String>,
    pub feedbacks: Vec<Feedback>,
    pub stop_reason: StopReason,
    pub llm_calls: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ProvenanceRecord {
    pub fn from_result(id: &str, result: &RefineResult) -> Self {
        ProvenanceRecord {
            id: id.to_string(),
            candidates: result.candidates.clone(),
            feedbacks: result.feedbacks.clone(),
            stop_reason: result.stop_reason,
            llm_calls: result.llm_calls,
            error: result.error.clone(),
        }
    }
}

const QUOTE_PAIRS: [(char, char); 4] = [('"', '"'), ('\'', '\''), ('“', '”'), ('‘', '’')];

/// Trims whitespace and one layer of matching surrounding quotes.
pub fn extract_candidate(raw: &str) -> String {
    let trimmed = raw.trim();
    let mut chars = trimmed.chars();
    if let (Some(first), Some(last)) = (chars.next(), chars.next_back()) {
        if QUOTE_PAIRS.contains(&(first, last)) {
            return trimmed[first.len_utf8()..trimmed.len() - last.len_utf8()]
                .trim()
                .to_string();
        }
    }
    trimmed.to_string()
}

/// Highest total wins; ties go to the later candidate.
pub fn select_final(candidates: &[String], feedbacks: &[Feedback]) -> String {
    feedbacks
        .iter()
        .enumerate()
        .max_by_key(|(i, fb)| (fb.total, *i))
        .map(|(i, _)| candidates[i].clone())
        .unwrap_or_else(|| candidates[0].clone())
}

pub struct RefineEngine<'a> {
    gateway: &'a Gateway,
    prompts: &'a PromptKit,
    config: RefineConfig,
}

impl<'a> RefineEngine<'a> {
    pub fn new(gateway: &'a Gateway, prompts: &'a PromptKit, config: RefineConfig) -> Self {
        RefineEngine {
            gateway,
            prompts,
            config,
        }
    }

    pub fn config(&self) -> &RefineConfig {
        &self.config
    }

    fn request(&self, bundle: PromptBundle, instance: &TaskInstance, step: u32) -> ChatRequest {
        let decoding = self.config.decoding(bundle.family);
        ChatRequest {
            system_text: bundle.system_text,
            user_text: bundle.user_text,
            model_id: self.config.model_id.clone(),
            temperature: decoding.temperature,
            max_tokens: decoding.max_tokens,
            tag: RequestTag::new(instance.id.clone(), bundle.family, step),
        }
    }

    fn complete_candidate(&self, request: ChatRequest) -> Result<String, RefineError> {
        let response = self.gateway.complete(&request)?;
        let candidate = extract_candidate(&response.text);
        if candidate.is_empty() {
            return Err(RefineError::InstanceFailure(
                "model returned an empty translation".into(),
            ));
        }
        Ok(candidate)
    }

    /// Initial translation from the generation prompt. One LLM call.
    pub fn generate_initial(
        &self,
        entity: &EntityRecord,
        instance: &TaskInstance,
    ) -> Result<String, RefineError> {
        let bundle = self.prompts.render_generation_prompt(entity, instance)?;
        self.complete_candidate(self.request(bundle, instance, 0))
    }

    /// Scores `candidate`, re-asking with a format reminder on unparseable
    /// answers up to the configured retry limit.
    pub fn solicit_feedback(
        &self,
        entity: &EntityRecord,
        instance: &TaskInstance,
        candidate: &str,
        step: u32,
    ) -> Result<SolicitedFeedback, RefineError> {
        if candidate.trim().is_empty() {
            return Err(RefineError::Precondition("candidate must be non-empty"));
        }
        let bundle = self
            .prompts
            .render_feedback_prompt(entity, instance, candidate)?;
        let base = self.request(bundle, instance, step);
        let mut calls = 0;
        let mut last = String::new();
        for attempt in 0..=self.config.feedback_retry_limit {
            let mut request = base.clone();
            if attempt > 0 {
                request.user_text = format!("{}\n\n{FORMAT_REMINDER}", base.user_text);
            }
            calls += 1;
            match self.gateway.complete(&request) {
                Ok(response) => match parse_feedback(&response.text) {
                    Ok(feedback) => return Ok(SolicitedFeedback { feedback, calls }),
                    Err(e) => {
                        log::debug!("{}: malformed feedback ({e})", base.tag);
                        last = e.to_string();
                    }
                },
                Err(e) => last = e.to_string(),
            }
        }
        Err(RefineError::FeedbackFailure { calls, last })
    }

    /// One revision conditioned on the full history. One LLM call.
    pub fn refine_once(
        &self,
        entity: &EntityRecord,
        instance: &TaskInstance,
        history: &[(String, Feedback)],
    ) -> Result<String, RefineError> {
        let (_, newest) = history
            .last()
            .ok_or(RefineError::Precondition("history must be non-empty"))?;
        if newest.is_perfect() {
            return Err(RefineError::Precondition(
                "refinement requested after a perfect score",
            ));
        }
        let bundle = self
            .prompts
            .render_refine_prompt(entity, instance, history)?;
        self.complete_candidate(self.request(bundle, instance, history.len() as u32))
    }

    /// Runs the whole loop for one instance.
    ///
    /// Fails only when the initial translation cannot be produced; later
    /// failures end the loop with the best candidate so far.
    pub fn run_loop(
        &self,
        entity: &EntityRecord,
        instance: &TaskInstance,
    ) -> Result<RefineResult, RefineError> {
        let y0 = self.generate_initial(entity, instance)?;
        let mut candidates = vec![y0];
        let mut feedbacks: Vec<Feedback> = Vec::new();
        let mut llm_calls = 1;
        let mut refinements_done = 0;
        let mut error = None;

        let stop_reason = loop {
            let step = (candidates.len() - 1) as u32;
            let newest = candidates.last().expect("at least one candidate");
            match self.solicit_feedback(entity, instance, newest, step) {
                Ok(s) => {
                    llm_calls += s.calls;
                    feedbacks.push(s.feedback);
                }
                Err(RefineError::FeedbackFailure { calls, last }) => {
                    llm_calls += calls;
                    error = Some(last);
                    break StopReason::FeedbackFailure;
                }
                Err(e) => {
                    error = Some(e.to_string());
                    break StopReason::FeedbackFailure;
                }
            }
            if feedbacks.last().is_some_and(Feedback::is_perfect) {
                break StopReason::PerfectScore;
            }
            if refinements_done >= self.config.max_refinements {
                break StopReason::MaxRefinements;
            }
            let history: Vec<(String, Feedback)> = candidates
                .iter()
                .cloned()
                .zip(feedbacks.iter().cloned())
                .collect();
            llm_calls += 1;
            match self.refine_once(entity, instance, &history) {
                Ok(next) => {
                    candidates.push(next);
                    refinements_done += 1;
                }
                Err(e) => {
                    error = Some(e.to_string());
                    break StopReason::InstanceFailure;
                }
            }
        };

        Ok(RefineResult {
            final_translation: select_final(&candidates, &feedbacks),
            candidates,
            feedbacks,
            stop_reason,
            llm_calls,
            refinements_done,
            error,
        })
    }
}
