//! JSONL task corpora: loading, validation and per-language statistics.
//!
//! Each line is one object of the form
//!
//! ```json
//! {"id": "...", "source_locale": "en", "target_locale": "ko",
//!  "source": "...", "wikidata_id": "Q214371",
//!  "targets": [{"translation": "...", "mention": "..."}]}
//! ```
//!
//! Lines that fail validation are collected into a [`ValidationReport`]
//! and skipped; the remaining lines are still loaded in file order.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::locale::Locale;
use crate::qid::Qid;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("failed to read corpus {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("duplicate instance id `{id}` on line {line} (first seen on line {first_line})")]
    DuplicateId {
        id: String,
        line: usize,
        first_line: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "valid" | "validation" | "dev" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split `{other}`")),
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LanguagePair {
    pub source: Locale,
    pub target: Locale,
}

impl LanguagePair {
    /// English into `target`. Fails for English itself.
    pub fn english_to(target: Locale) -> Result<Self, String> {
        if !target.is_target() {
            return Err(format!("`{target}` is not a supported target locale"));
        }
        Ok(LanguagePair {
            source: Locale::En,
            target,
        })
    }
}

impl fmt::Display for LanguagePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.source, self.target)
    }
}

impl FromStr for LanguagePair {
    type Err = String;

    /// Parses `en-ko` style pairs, or a bare target code.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (src, tgt) = match s.split_once('-') {
            Some((a, b)) => (a, b),
            None => ("en", s),
        };
        let source: Locale = src.parse().map_err(|e| format!("{e}"))?;
        if source != Locale::En {
            return Err(format!("source locale must be en, got `{src}`"));
        }
        let target: Locale = tgt.parse().map_err(|e| format!("{e}"))?;
        LanguagePair::english_to(target)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceTranslation {
    #[serde(rename = "translation")]
    pub translation_text: String,
    #[serde(rename = "mention", default, skip_serializing_if = "Option::is_none")]
    pub entity_mention: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskInstance {
    pub id: String,
    pub language_pair: LanguagePair,
    pub source_text: String,
    pub wikidata_qid: Qid,
    pub references: Vec<ReferenceTranslation>,
}

impl TaskInstance {
    pub fn target(&self) -> Locale {
        self.language_pair.target
    }

    /// Test-split inputs carry no references and are skipped by scoring.
    pub fn is_unreferenced(&self) -> bool {
        self.references.is_empty()
    }

    /// Non-empty gold entity mentions across all references, first-seen order.
    pub fn gold_mentions(&self) -> Vec<&str> {
        let mut seen = HashSet::new();
        self.references
            .iter()
            .filter_map(|r| r.entity_mention.as_deref())
            .filter(|m| !m.is_empty() && seen.insert(*m))
            .collect()
    }
}

/// Wire shape of one corpus line.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInstance {
    id: String,
    source_locale: String,
    target_locale: String,
    source: String,
    wikidata_id: String,
    #[serde(default)]
    targets: Vec<ReferenceTranslation>,
}

impl RawInstance {
    fn validate(self) -> Result<TaskInstance, String> {
        if self.id.trim().is_empty() {
            return Err("empty id".into());
        }
        let source: Locale = self.source_locale.parse().map_err(|e| format!("{e}"))?;
        if source != Locale::En {
            return Err(format!(
                "source_locale must be en, got `{}`",
                self.source_locale
            ));
        }
        let target: Locale = self.target_locale.parse().map_err(|e| format!("{e}"))?;
        let language_pair = LanguagePair::english_to(target)?;
        if self.source.trim().is_empty() {
            return Err("empty source text".into());
        }
        let wikidata_qid = Qid::new(&self.wikidata_id).map_err(|e| e.to_string())?;
        for (i, reference) in self.targets.iter().enumerate() {
            if reference.translation_text.is_empty() {
                return Err(format!("targets[{i}]: empty translation"));
            }
            if let Some(mention) = &reference.entity_mention {
                if !reference.translation_text.contains(mention.as_str()) {
                    return Err(format!(
                        "targets[{i}]: mention `{mention}` is not a substring of the translation"
                    ));
                }
            }
        }
        Ok(TaskInstance {
            id: self.id,
            language_pair,
            source_text: self.source,
            wikidata_qid,
            references: self.targets,
        })
    }

    fn from_instance(instance: &TaskInstance) -> Self {
        RawInstance {
            id: instance.id.clone(),
            source_locale: instance.language_pair.source.code().to_string(),
            target_locale: instance.language_pair.target.code().to_string(),
            source: instance.source_text.clone(),
            wikidata_id: instance.wikidata_qid.to_string(),
            targets: instance.references.clone(),
        }
    }
}

/// Maps alternative field spellings onto the canonical names before parsing.
#[derive(Debug, Clone, Default)]
pub struct FieldAliases {
    map: HashMap<String, String>,
}

impl FieldAliases {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, alias: &str, canonical: &str) -> Self {
        self.map.insert(alias.to_string(), canonical.to_string());
        self
    }

    /// Parses `alias=canonical` entries separated by commas.
    pub fn parse(spec: &str) -> Result<Self, String> {
        let mut aliases = FieldAliases::new();
        for entry in spec.split(',').map(str::trim).filter(|e| !e.is_empty()) {
            let (alias, canonical) = entry
                .split_once('=')
                .ok_or_else(|| format!("alias entry `{entry}` is not alias=canonical"))?;
            aliases = aliases.with(alias.trim(), canonical.trim());
        }
        Ok(aliases)
    }

    fn apply(&self, object: Map<String, Value>) -> Map<String, Value> {
        if self.map.is_empty() {
            return object;
        }
        object
            .into_iter()
            .map(|(k, v)| match self.map.get(&k) {
                Some(canonical) => (canonical.clone(), v),
                None => (k, v),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineError {
    pub line: usize,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub errors: Vec<LineError>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.errors {
            out.push_str(&serde_json::to_string(e).expect("line error serializes"));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub split: Split,
    pub instances: Vec<TaskInstance>,
}

impl Corpus {
    pub fn new(split: Split, instances: Vec<TaskInstance>) -> Self {
        Corpus { split, instances }
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&TaskInstance> {
        self.instances.iter().find(|i| i.id == id)
    }

    /// Distinct QIDs in first-seen order.
    pub fn distinct_qids(&self) -> Vec<Qid> {
        let mut seen = HashSet::new();
        self.instances
            .iter()
            .filter(|i| seen.insert(&i.wikidata_qid))
            .map(|i| i.wikidata_qid.clone())
            .collect()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for instance in &self.instances {
            let raw = RawInstance::from_instance(instance);
            out.push_str(&serde_json::to_string(&raw).expect("instance serializes"));
            out.push('\n');
        }
        out
    }

    pub fn write_jsonl(&self, path: &Path) -> io::Result<()> {
        let mut file = File::create(path)?;
        file.write_all(self.to_jsonl().as_bytes())
    }
}

#[derive(Debug, Clone)]
pub struct LoadedCorpus {
    pub corpus: Corpus,
    pub report: ValidationReport,
}

pub fn load_corpus(path: &Path, split: Split) -> Result<LoadedCorpus, CorpusError> {
    load_corpus_with_aliases(path, split, &FieldAliases::default())
}

pub fn load_corpus_with_aliases(
    path: &Path,
    split: Split,
    aliases: &FieldAliases,
) -> Result<LoadedCorpus, CorpusError> {
    let io_err = |source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = File::open(path).map_err(io_err)?;
    parse_corpus(BufReader::new(file), split, aliases).map_err(|e| match e {
        ParseFailure::Io(source) => io_err(source),
        ParseFailure::Corpus(e) => e,
    })
}

enum ParseFailure {
    Io(io::Error),
    Corpus(CorpusError),
}

fn parse_corpus<R: BufRead>(
    reader: R,
    split: Split,
    aliases: &FieldAliases,
) -> Result<LoadedCorpus, ParseFailure> {
    let mut instances = Vec::new();
    let mut report = ValidationReport::default();
    let mut first_seen: HashMap<String, usize> = HashMap::new();

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(ParseFailure::Io)?;
        if line.trim().is_empty() {
            continue;
        }
        match parse_line(&line, aliases) {
            Ok(instance) => {
                if let Some(&first_line) = first_seen.get(&instance.id) {
                    return Err(ParseFailure::Corpus(CorpusError::DuplicateId {
                        id: instance.id,
                        line: line_no,
                        first_line,
                    }));
                }
                first_seen.insert(instance.id.clone(), line_no);
                instances.push(instance);
            }
            Err(error) => report.errors.push(LineError {
                line: line_no,
                error,
            }),
        }
    }

    Ok(LoadedCorpus {
        corpus: Corpus::new(split, instances),
        report,
    })
}

fn parse_line(line: &str, aliases: &FieldAliases) -> Result<TaskInstance, String> {
    let value: Value = serde_json::from_str(line).map_err(|e| format!("invalid JSON: {e}"))?;
    let Value::Object(object) = value else {
        return Err("line is not a JSON object".into());
    };
    let raw: RawInstance =
        serde_json::from_value(Value::Object(aliases.apply(object))).map_err(|e| e.to_string())?;
    raw.validate()
}

/// Instance count per target locale.
pub fn corpus_stats(corpus: &Corpus) -> BTreeMap<Locale, usize> {
    let mut counts = BTreeMap::new();
    for instance in &corpus.instances {
        *counts.entry(instance.target()).or_insert(0) += 1;
    }
    counts
}

/// Renders stats as an aligned two-column table with a total row.
pub fn format_stats_table(stats: &BTreeMap<Locale, usize>) -> String {
    let mut out = format!("{:<10} {:>8}\n", "Language", "Count");
    for (locale, count) in stats {
        out.push_str(&format!("{:<10} {:>8}\n", locale.language_name(), count));
    }
    out.push_str(&format!(
        "{:<10} {:>8}\n",
        "Total",
        stats.values().sum::<usize>()
    ));
    out
}
