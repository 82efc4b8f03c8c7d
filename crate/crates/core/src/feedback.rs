//! Two-criterion feedback and its line grammar.
//!
//! A feedback answer consists of three labelled lines:
//!
//! ```text
//! Entity Accuracy: 3/5
//! Translation Quality: 5/5
//! Comments: entity label is literal.
//! ```
//!
//! Labels are matched case-insensitively after trimming whitespace and
//! markdown emphasis. The comment may continue over following lines.

use serde::{Deserialize, Serialize};

pub const MAX_CRITERION_SCORE: u8 = 5;
pub const PERFECT_TOTAL: u8 = 2 * MAX_CRITERION_SCORE;

const ENTITY_LABEL: &str = "Entity Accuracy";
const QUALITY_LABEL: &str = "Translation Quality";
const COMMENTS_LABEL: &str = "Comments";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawFeedback")]
pub struct Feedback {
    pub entity_score: u8,
    pub quality_score: u8,
    pub total: u8,
    pub commentary: String,
}

#[derive(Deserialize)]
struct RawFeedback {
    entity_score: u8,
    quality_score: u8,
    total: u8,
    commentary: String,
}

impl TryFrom<RawFeedback> for Feedback {
    type Error = String;

    fn try_from(raw: RawFeedback) -> Result<Self, Self::Error> {
        let fb = Feedback::new(raw.entity_score, raw.quality_score, raw.commentary)
            .map_err(|e| e.to_string())?;
        if fb.total != raw.total {
            return Err(format!(
                "total {} does not equal the sum of the scores",
                raw.total
            ));
        }
        Ok(fb)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MalformedFeedback {
    #[error("missing `{0}:` line")]
    MissingLine(&'static str),
    #[error("`{0}:` appears more than once")]
    Duplicate(&'static str),
    #[error("{label} score `{value}` is not an integer out of 5")]
    NonInteger { label: &'static str, value: String },
    #[error("{label} score {value} is outside 0-5")]
    OutOfRange { label: &'static str, value: u32 },
}

impl Feedback {
    pub fn new(
        entity_score: u8,
        quality_score: u8,
        commentary: impl Into<String>,
    ) -> Result<Self, MalformedFeedback> {
        for (label, v) in [(ENTITY_LABEL, entity_score), (QUALITY_LABEL, quality_score)] {
            if v > MAX_CRITERION_SCORE {
                return Err(MalformedFeedback::OutOfRange {
                    label,
                    value: u32::from(v),
                });
            }
        }
        Ok(Feedback {
            entity_score,
            quality_score,
            total: entity_score + quality_score,
            commentary: commentary.into(),
        })
    }

    pub fn is_perfect(&self) -> bool {
        self.total == PERFECT_TOTAL
    }

    /// Canonical rendering; parses back to an equal value.
    pub fn to_text(&self) -> String {
        format!(
            "{ENTITY_LABEL}: {}/5\n{QUALITY_LABEL}: {}/5\n{COMMENTS_LABEL}: {}",
            self.entity_score, self.quality_score, self.commentary
        )
    }
}

fn strip_label<'a>(line: &'a str, label: &str) -> Option<&'a str> {
    let line = line.trim().trim_start_matches(['*', '-', '#', ' ']);
    let head = line.get(..label.len())?;
    if !head.eq_ignore_ascii_case(label) {
        return None;
    }
    let rest = line[label.len()..].trim_start_matches('*');
    let rest = rest.strip_prefix(':')?;
    Some(rest.trim_start_matches('*'))
}

fn parse_score(label: &'static str, value: &str) -> Result<u8, MalformedFeedback> {
    let value = value.trim();
    let non_integer = || MalformedFeedback::NonInteger {
        label,
        value: value.to_string(),
    };
    let (num, den) = value.split_once('/').ok_or_else(non_integer)?;
    if den.trim() != "5" {
        return Err(non_integer());
    }
    let num = num.trim();
    if num.is_empty() || !num.bytes().all(|b| b.is_ascii_digit()) {
        return Err(non_integer());
    }
    let n: u32 = num.parse().map_err(|_| non_integer())?;
    if n > u32::from(MAX_CRITERION_SCORE) {
        return Err(MalformedFeedback::OutOfRange { label, value: n });
    }
    Ok(n as u8)
}

pub fn parse_feedback(raw: &str) -> Result<Feedback, MalformedFeedback> {
    let mut entity = None;
    let mut quality = None;
    let mut comments: Option<Vec<&str>> = None;
    let mut in_comments = false;

    for line in raw.lines() {
        if let Some(v) = strip_label(line, ENTITY_LABEL) {
            if entity.replace(parse_score(ENTITY_LABEL, v)?).is_some() {
                return Err(MalformedFeedback::Duplicate(ENTITY_LABEL));
            }
            in_comments = false;
        } else if let Some(v) = strip_label(line, QUALITY_LABEL) {
            if quality.replace(parse_score(QUALITY_LABEL, v)?).is_some() {
                return Err(MalformedFeedback::Duplicate(QUALITY_LABEL));
            }
            in_comments = false;
        } else if let Some(v) = strip_label(line, COMMENTS_LABEL) {
            if comments.replace(vec![v.trim()]).is_some() {
                return Err(MalformedFeedback::Duplicate(COMMENTS_LABEL));
            }
            in_comments = true;
        } else if in_comments {
            comments
                .as_mut()
                .expect("comments started")
                .push(line.trim_end());
        }
    }

    let entity = entity.ok_or(MalformedFeedback::MissingLine(ENTITY_LABEL))?;
    let quality = quality.ok_or(MalformedFeedback::MissingLine(QUALITY_LABEL))?;
    let comments = comments.ok_or(MalformedFeedback::MissingLine(COMMENTS_LABEL))?;
    let commentary = comments.join("\n").trim().to_string();
    Feedback::new(entity, quality, commentary)
}
