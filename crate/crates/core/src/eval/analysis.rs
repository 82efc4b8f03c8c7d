//! Does label similarity between English and the target language predict
//! entity accuracy? Restricted to Latin-script targets, where edit distance
//! between labels is meaningful.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::locale::Locale;

use super::meta::MetaOutcome;
use super::metrics::{levenshtein_ratio, point_biserial_r, spearman_rho};
use super::report::{render_table, EntityMap};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEntry {
    pub n: usize,
    pub excluded_missing_label: usize,
    pub spearman_rho: Option<f64>,
    pub point_biserial_r: Option<f64>,
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub languages: BTreeMap<Locale, CorrelationEntry>,
    pub notices: Vec<String>,
}

impl CorrelationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_text_table(&self) -> String {
        let header: Vec<String> = ["Lang", "rho", "r", "n", "excluded"]
            .map(String::from)
            .to_vec();
        let fmt = |v: Option<f64>| v.map(|v| format!("{v:.2}")).unwrap_or_else(|| "-".into());
        let rows: Vec<Vec<String>> = self
            .languages
            .iter()
            .map(|(l, e)| {
                vec![
                    l.code().to_uppercase(),
                    fmt(e.spearman_rho),
                    fmt(e.point_biserial_r),
                    e.n.to_string(),
                    e.excluded_missing_label.to_string(),
                ]
            })
            .collect();
        let mut out = render_table(&header, &rows);
        for (l, e) in &self.languages {
            for err in &e.errors {
                out.push_str(&format!("note: {}: {err}\n", l.code().to_uppercase()));
            }
        }
        for n in &self.notices {
            out.push_str(&format!("note: {n}\n"));
        }
        out
    }
}

/// Correlates the English/target label edit ratio with M-ETA correctness,
/// per Latin-script target locale.
pub fn analyze_label_similarity(
    corpus: &Corpus,
    entities: &EntityMap,
    outcomes: &[MetaOutcome],
) -> CorrelationReport {
    let index: HashMap<&str, usize> = corpus
        .instances
        .iter()
        .enumerate()
        .map(|(i, inst)| (inst.id.as_str(), i))
        .collect();
    let mut samples: BTreeMap<Locale, (Vec<f64>, Vec<bool>)> = BTreeMap::new();
    let mut report = CorrelationReport::default();
    let (mut unknown, mut non_latin) = (0, 0);

    for outcome in outcomes {
        let Some(&i) = index.get(outcome.instance_id.as_str()) else {
            unknown += 1;
            continue;
        };
        let instance = &corpus.instances[i];
        let locale = instance.target();
        if !Locale::LATIN_TARGETS.contains(&locale) {
            non_latin += 1;
            continue;
        }
        let entry = report.languages.entry(locale).or_default();
        let labels = entities.get(&instance.wikidata_qid).and_then(|e| {
            Some((
                e.label(Locale::En)?.to_string(),
                e.label(locale)?.to_string(),
            ))
        });
        let Some((en, target)) = labels else {
            entry.excluded_missing_label += 1;
            continue;
        };
        let (xs, flags) = samples.entry(locale).or_default();
        xs.push(levenshtein_ratio(&en, &target));
        flags.push(outcome.correct);
    }

    for (locale, entry) in report.languages.iter_mut() {
        let (xs, flags) = samples.remove(locale).unwrap_or_default();
        entry.n = xs.len();
        let ys: Vec<f64> = flags.iter().map(|&f| f64::from(u8::from(f))).collect();
        match spearman_rho(&xs, &ys) {
            Ok(v) => entry.spearman_rho = Some(v),
            Err(e) => entry.errors.push(format!("spearman: {e}")),
        }
        match point_biserial_r(&xs, &flags) {
            Ok(v) => entry.point_biserial_r = Some(v),
            Err(e) => entry.errors.push(format!("point-biserial: {e}")),
        }
    }

    if unknown > 0 {
        report.notices.push(format!(
            "{unknown} outcomes did not match a corpus instance"
        ));
    }
    if non_latin > 0 {
        report.notices.push(format!(
            "{non_latin} outcomes for non-Latin-script targets excluded"
        ));
    }
    if report.languages.is_empty() {
        report
            .notices
            .push("no Latin-script outcomes to analyze".into());
    }
    report
}
