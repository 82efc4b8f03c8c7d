//! Client side of the external quality-estimation scorer.
//!
//! Wire protocol: `POST {base}/score` with `{"pairs":[{"src","mt","ref"}]}`
//! answers `{"scores":[...]}` in input order, each in [0, 1];
//! `GET {base}/health` answers 200 when the model is loaded.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::http::{HttpRequest, HttpTransport};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScorePair {
    pub src: String,
    pub mt: String,
    #[serde(rename = "ref")]
    pub reference: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScorerError {
    #[error("scorer unavailable: {0}")]
    Unavailable(String),
    #[error("scorer protocol violation: {0}")]
    Protocol(String),
}

pub trait ExternalScorer: Send + Sync {
    /// Scores in [0, 1], aligned with `pairs`.
    fn score(&self, pairs: &[ScorePair]) -> Result<Vec<f64>, ScorerError>;
    fn health(&self) -> Result<(), ScorerError>;
}

#[derive(Serialize)]
struct ScoreRequest<'a> {
    pairs: &'a [ScorePair],
}

#[derive(Deserialize)]
struct ScoreResponse {
    scores: Vec<f64>,
}

pub struct HttpScorer {
    base_url: String,
    transport: Arc<dyn HttpTransport>,
    batch_size: usize,
}

impl HttpScorer {
    pub const DEFAULT_BATCH_SIZE: usize = 64;

    pub fn new(base_url: &str, transport: Arc<dyn HttpTransport>) -> Self {
        HttpScorer {
            base_url: base_url.trim_end_matches('/').to_string(),
            transport,
            batch_size: Self::DEFAULT_BATCH_SIZE,
        }
    }

    pub fn with_batch_size(mut self, batch_size: usize) -> Self {
        self.batch_size = batch_size.max(1);
        self
    }

    fn score_batch(&self, pairs: &[ScorePair]) -> Result<Vec<f64>, ScorerError> {
        let body = serde_json::to_value(ScoreRequest { pairs }).expect("pairs serialize");
        let response = self
            .transport
            .execute(&HttpRequest::post_json(
                format!("{}/score", self.base_url),
                &body,
            ))
            .map_err(|e| ScorerError::Unavailable(e.to_string()))?;
        if !response.is_success() {
            return Err(ScorerError::Unavailable(format!(
                "/score returned HTTP {}",
                response.status
            )));
        }
        let parsed: ScoreResponse = serde_json::from_str(&response.body)
            .map_err(|e| ScorerError::Protocol(e.to_string()))?;
        if parsed.scores.len() != pairs.len() {
            return Err(ScorerError::Protocol(format!(
                "sent {} pairs, got {} scores",
                pairs.len(),
                parsed.scores.len()
            )));
        }
        if let Some(bad) = parsed.scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return Err(ScorerError::Protocol(format!("score {bad} outside [0, 1]")));
        }
        Ok(parsed.scores)
    }
}

impl ExternalScorer for HttpScorer {
    fn score(&self, pairs: &[ScorePair]) -> Result<Vec<f64>, ScorerError> {
        let mut out = Vec::with_capacity(pairs.len());
        for chunk in pairs.chunks(self.batch_size) {
            out.extend(self.score_batch(chunk)?);
        }
        Ok(out)
    }

    fn health(&self) -> Result<(), ScorerError> {
        let response = self
            .transport
            .execute(&HttpRequest::get(format!("{}/health", self.base_url)))
            .map_err(|e| ScorerError::Unavailable(e.to_string()))?;
        if response.status == 200 {
            Ok(())
        } else {
            Err(ScorerError::Unavailable(format!(
                "/health returned HTTP {}",
                response.status
            )))
        }
    }
}

/// Scores every pair; an empty list never contacts the scorer.
pub fn comet_scores(
    pairs: &[ScorePair],
    scorer: &dyn ExternalScorer,
) -> Result<Vec<f64>, ScorerError> {
    if pairs.is_empty() {
        return Ok(Vec::new());
    }
    scorer.score(pairs)
}
