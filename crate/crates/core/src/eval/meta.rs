//! Entity translation accuracy (M-ETA).
//!
//! An instance counts as correct when any gold surface form occurs in the
//! hypothesis after NFKC normalization, with case folded for Latin-script
//! targets. Gold surfaces are the reference entity mentions followed by the
//! Wikidata target label and aliases. This is a reimplementation; official
//! shared-task numbers may use a different matching rule.

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::corpus::TaskInstance;
use crate::locale::Locale;
use crate::wikidata::EntityRecord;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawOutcome")]
pub struct MetaOutcome {
    pub instance_id: String,
    pub correct: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matched_surface: Option<String>,
}

#[derive(Deserialize)]
struct RawOutcome {
    instance_id: String,
    correct: bool,
    #[serde(default)]
    matched_surface: Option<String>,
}

impl TryFrom<RawOutcome> for MetaOutcome {
    type Error = String;

    fn try_from(raw: RawOutcome) -> Result<Self, Self::Error> {
        if raw.correct != raw.matched_surface.is_some() {
            return Err(format!(
                "outcome {}: `correct` must be true exactly when `matched_surface` is set",
                raw.instance_id
            ));
        }
        Ok(MetaOutcome {
            instance_id: raw.instance_id,
            correct: raw.correct,
            matched_surface: raw.matched_surface,
        })
    }
}

impl MetaOutcome {
    pub fn matched(instance_id: impl Into<String>, surface: impl Into<String>) -> Self {
        MetaOutcome {
            instance_id: instance_id.into(),
            correct: true,
            matched_surface: Some(surface.into()),
        }
    }

    pub fn unmatched(instance_id: impl Into<String>) -> Self {
        MetaOutcome {
            instance_id: instance_id.into(),
            correct: false,
            matched_surface: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetaError {
    #[error("no gold surface forms to match against")]
    EmptyGoldSurfaces,
    #[error("no outcomes to aggregate")]
    EmptyInput,
}

/// NFKC, plus lowercase for Latin-script locales.
pub fn normalize_surface(text: &str, locale: Locale) -> String {
    let nfkc: String = text.nfkc().collect();
    if locale.is_latin_script() {
        nfkc.to_lowercase()
    } else {
        nfkc
    }
}

/// Reference mentions, then the Wikidata target label, then its aliases,
/// without duplicates.
pub fn gold_surfaces(instance: &TaskInstance, entity: Option<&EntityRecord>) -> Vec<String> {
    let target = instance.target();
    let mut out: Vec<String> = Vec::new();
    let mut push = |s: &str| {
        let s = s.trim();
        if !s.is_empty() && !out.iter().any(|o| o == s) {
            out.push(s.to_string());
        }
    };
    for m in instance.gold_mentions() {
        push(m);
    }
    if let Some(e) = entity {
        if let Some(label) = e.label(target) {
            push(label);
        }
        for alias in e.aliases(target) {
            push(alias);
        }
    }
    out
}

pub fn meta_match(
    instance_id: &str,
    hypothesis: &str,
    surfaces: &[String],
    locale: Locale,
) -> Result<MetaOutcome, MetaError> {
    let hyp = normalize_surface(hypothesis, locale);
    let mut any = false;
    for surface in surfaces {
        let norm = normalize_surface(surface, locale);
        if norm.trim().is_empty() {
            continue;
        }
        any = true;
        if hyp.contains(&norm) {
            return Ok(MetaOutcome::matched(instance_id, surface.clone()));
        }
    }
    if any {
        Ok(MetaOutcome::unmatched(instance_id))
    } else {
        Err(MetaError::EmptyGoldSurfaces)
    }
}

/// Percentage of correct outcomes.
pub fn meta_aggregate(outcomes: &[MetaOutcome]) -> Result<f64, MetaError> {
    if outcomes.is_empty() {
        return Err(MetaError::EmptyInput);
    }
    let correct = outcomes.iter().filter(|o| o.correct).count();
    Ok(100.0 * correct as f64 / outcomes.len() as f64)
}
