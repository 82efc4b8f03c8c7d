//! Per-language score reports and the evaluation pipeline that builds them.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, TaskInstance};
use crate::locale::Locale;
use crate::qid::Qid;
use crate::wikidata::EntityRecord;

use super::meta::{gold_surfaces, meta_aggregate, meta_match, MetaOutcome};
use super::metrics::harmonic_mean;
use super::scorer::{comet_scores, ExternalScorer, ScorePair};

pub type EntityMap = BTreeMap<Qid, Arc<EntityRecord>>;

/// The fields of a prediction line that evaluation reads.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionLine {
    pub id: String,
    pub prediction: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LanguageCounts {
    pub scored: usize,
    pub skipped_unreferenced: usize,
    pub skipped_no_gold: usize,
    pub missing_prediction: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LanguageScores {
    pub meta_accuracy: Option<f64>,
    pub comet_score: Option<f64>,
    pub harmonic: Option<f64>,
    pub counts: LanguageCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub method: String,
    pub languages: BTreeMap<Locale, LanguageScores>,
    /// Prediction ids that matched no corpus instance.
    pub unknown_ids: Vec<String>,
    /// Predictions joined to a corpus instance.
    pub joined: usize,
    pub notices: Vec<String>,
}

type MetricRow = (&'static str, fn(&LanguageScores) -> Option<f64>);

fn cell(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.2}")).unwrap_or_else(|| "-".into())
}

/// Left-aligned first column, right-aligned others.
pub(crate) fn render_table(header: &[String], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: &[String]| {
        let parts: Vec<String> = cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, &w))| {
                if i == 0 {
                    format!("{c:<w$}")
                } else {
                    format!("{c:>w$}")
                }
            })
            .collect();
        parts.join("  ").trim_end().to_string()
    };
    let mut out = line(header);
    out.push('\n');
    out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
    out.push('\n');
    for row in rows {
        out.push_str(&line(row));
        out.push('\n');
    }
    out
}

impl ScoreReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Metrics as rows, languages as columns.
    pub fn to_text_table(&self) -> String {
        let mut header = vec![format!("Method: {}", self.method)];
        header.extend(self.languages.keys().map(|l| l.code().to_uppercase()));
        let has_comet = self.languages.values().any(|s| s.comet_score.is_some());
        let mut metrics: Vec<MetricRow> = vec![("M-ETA", |s| s.meta_accuracy)];
        if has_comet {
            metrics.push(("COMET", |s| s.comet_score));
            metrics.push(("Harmonic", |s| s.harmonic));
        }
        let rows: Vec<Vec<String>> = metrics
            .iter()
            .map(|(name, get)| {
                let mut row = vec![name.to_string()];
                row.extend(self.languages.values().map(|s| cell(get(s))));
                row
            })
            .collect();
        let mut out = render_table(&header, &rows);
        for n in &self.notices {
            out.push_str(&format!("note: {n}\n"));
        }
        out
    }
}

/// One row per method: the harmonic mean where available, M-ETA otherwise.
pub fn format_method_table(reports: &[ScoreReport]) -> String {
    let mut locales: Vec<Locale> = reports
        .iter()
        .flat_map(|r| r.languages.keys().copied())
        .collect();
    locales.sort();
    locales.dedup();
    let mut header = vec!["Method".to_string()];
    header.extend(locales.iter().map(|l| l.code().to_uppercase()));
    let mut meta_only = false;
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            let mut row = vec![r.method.clone()];
            for l in &locales {
                let v = r.languages.get(l).and_then(|s| {
                    s.harmonic.or_else(|| {
                        meta_only |= s.meta_accuracy.is_some();
                        s.meta_accuracy
                    })
                });
                row.push(cell(v));
            }
            row
        })
        .collect();
    let mut out = render_table(&header, &rows);
    if meta_only {
        out.push_str("note: cells without COMET show M-ETA instead of the harmonic mean\n");
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub report: ScoreReport,
    /// Outcomes for scored instances, in corpus order.
    pub outcomes: Vec<MetaOutcome>,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Joins predictions to the corpus, scores entity accuracy and, when a
/// scorer is given, COMET.
pub fn evaluate(
    corpus: &Corpus,
    predictions: &[PredictionLine],
    entities: &EntityMap,
    scorer: Option<&dyn ExternalScorer>,
    method: &str,
) -> Evaluation {
    let mut notices = Vec::new();
    let mut by_id: HashMap<&str, &str> = HashMap::new();
    let mut unknown_ids = Vec::new();
    let mut joined = 0;
    for p in predictions {
        if corpus.get(&p.id).is_none() {
            unknown_ids.push(p.id.clone());
        } else if by_id.contains_key(p.id.as_str()) {
            notices.push(format!("duplicate prediction for {}; first one kept", p.id));
        } else {
            by_id.insert(&p.id, &p.prediction);
            joined += 1;
        }
    }

    let mut languages: BTreeMap<Locale, LanguageScores> = BTreeMap::new();
    let mut outcomes = Vec::new();
    let mut per_locale: BTreeMap<Locale, Vec<MetaOutcome>> = BTreeMap::new();
    let mut comet_inputs: Vec<(Locale, ScorePair)> = Vec::new();

    for instance in &corpus.instances {
        let locale = instance.target();
        let Some(&hypothesis) = by_id.get(instance.id.as_str()) else {
            languages
                .entry(locale)
                .or_default()
                .counts
                .missing_prediction += 1;
            continue;
        };
        let counts = &mut languages.entry(locale).or_default().counts;
        if instance.is_unreferenced() {
            counts.skipped_unreferenced += 1;
            continue;
        }
        comet_inputs.push((locale, score_pair(instance, hypothesis)));
        let entity = entities.get(&instance.wikidata_qid).map(Arc::as_ref);
        match meta_match(
            &instance.id,
            hypothesis,
            &gold_surfaces(instance, entity),
            locale,
        ) {
            Ok(outcome) => {
                counts.scored += 1;
                per_locale.entry(locale).or_default().push(outcome.clone());
                outcomes.push(outcome);
            }
            Err(_) => counts.skipped_no_gold += 1,
        }
    }
    let missing: usize = languages
        .values()
        .map(|s| s.counts.missing_prediction)
        .sum();
    if missing > 0 {
        notices.push(format!("{missing} corpus instances have no prediction"));
    }
    languages.retain(|_, s| {
        s.counts.scored + s.counts.skipped_unreferenced + s.counts.skipped_no_gold > 0
    });

    for (locale, o) in &per_locale {
        languages
            .get_mut(locale)
            .expect("locale seen")
            .meta_accuracy = meta_aggregate(o).ok();
    }

    match scorer {
        None => notices.push("COMET omitted: no scorer configured".into()),
        Some(scorer) => {
            let pairs: Vec<ScorePair> = comet_inputs.iter().map(|(_, p)| p.clone()).collect();
            match comet_scores(&pairs, scorer) {
                Ok(scores) => {
                    let mut grouped: BTreeMap<Locale, Vec<f64>> = BTreeMap::new();
                    for ((locale, _), s) in comet_inputs.iter().zip(scores) {
                        grouped.entry(*locale).or_default().push(s);
                    }
                    for (locale, s) in grouped {
                        let entry = languages.get_mut(&locale).expect("locale seen");
                        entry.comet_score = Some(100.0 * mean(&s));
                    }
                }
                Err(e) => notices.push(format!("COMET omitted: {e}")),
            }
        }
    }
    for s in languages.values_mut() {
        if let (Some(c), Some(m)) = (s.comet_score, s.meta_accuracy) {
            s.harmonic = Some(harmonic_mean(c, m));
        }
    }
    if !unknown_ids.is_empty() {
        notices.push(format!(
            "{} prediction ids not found in the corpus",
            unknown_ids.len()
        ));
    }

    Evaluation {
        report: ScoreReport {
            method: method.to_string(),
            languages,
            unknown_ids,
            joined,
            notices,
        },
        outcomes,
    }
}

fn score_pair(instance: &TaskInstance, hypothesis: &str) -> ScorePair {
    ScorePair {
        src: instance.source_text.clone(),
        mt: hypothesis.to_string(),
        reference: instance.references[0].translation_text.clone(),
    }
}
