use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::locale::Locale;
use crate::qid::Qid;

/// Labels, descriptions and aliases of one Wikidata item, keyed by locale.
///
/// Locales the API had nothing for are absent from the maps; an empty
/// string is never stored in place of a missing value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityRecord {
    pub qid: Qid,
    #[serde(default)]
    pub labels: BTreeMap<Locale, String>,
    #[serde(default)]
    pub descriptions: BTreeMap<Locale, String>,
    #[serde(default)]
    pub aliases: BTreeMap<Locale, Vec<String>>,
    pub retrieved_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("entity {0} has no English label")]
pub struct MissingEnglishLabel(pub Qid);

impl EntityRecord {
    pub fn new(qid: Qid, retrieved_at: DateTime<Utc>) -> Self {
        EntityRecord {
            qid,
            labels: BTreeMap::new(),
            descriptions: BTreeMap::new(),
            aliases: BTreeMap::new(),
            retrieved_at,
        }
    }

    pub fn label(&self, locale: Locale) -> Option<&str> {
        self.labels.get(&locale).map(String::as_str)
    }

    pub fn description(&self, locale: Locale) -> Option<&str> {
        self.descriptions.get(&locale).map(String::as_str)
    }

    pub fn aliases(&self, locale: Locale) -> &[String] {
        self.aliases
            .get(&locale)
            .map(Vec::as_slice)
            .unwrap_or_default()
    }
}

/// Line used in place of a target-locale label the record lacks.
pub const NO_TARGET_LABEL: &str = "no target-locale label available";

/// Renders the entity information block embedded in every prompt.
///
/// English comes first, then the target locale. Absent descriptions and
/// aliases are omitted; an absent target label is stated explicitly.
pub fn entity_summary(
    record: &EntityRecord,
    target: Locale,
) -> Result<String, MissingEnglishLabel> {
    let en_label = record
        .label(Locale::En)
        .ok_or_else(|| MissingEnglishLabel(record.qid.clone()))?;

    let mut lines = vec![format!("Wikidata ID: {}", record.qid)];
    push_locale(&mut lines, record, Locale::En, en_label);

    if target != Locale::En {
        let name = target.language_name();
        match record.label(target) {
            Some(label) => push_locale(&mut lines, record, target, label),
            None => {
                lines.push(format!("{name} label: {NO_TARGET_LABEL}"));
                if let Some(d) = record.description(target) {
                    lines.push(format!("{name} description: {d}"));
                }
                push_aliases(&mut lines, record, target);
            }
        }
    }
    Ok(lines.join("\n"))
}

fn push_locale(lines: &mut Vec<String>, record: &EntityRecord, locale: Locale, label: &str) {
    let name = locale.language_name();
    lines.push(format!("{name} label: {label}"));
    if let Some(d) = record.description(locale) {
        lines.push(format!("{name} description: {d}"));
    }
    push_aliases(lines, record, locale);
}

fn push_aliases(lines: &mut Vec<String>, record: &EntityRecord, locale: Locale) {
    let aliases = record.aliases(locale);
    if !aliases.is_empty() {
        lines.push(format!(
            "{} aliases: {}",
            locale.language_name(),
            aliases.join("; ")
        ));
    }
}
