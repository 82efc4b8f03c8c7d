//! Static few-shot review examples, one directory per language pair:
//! `<root>/en-ko/*.jsonl`, each line a [`FewShotExample`].

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::LanguagePair;
use crate::feedback::{parse_feedback, MAX_CRITERION_SCORE};
use crate::locale::Locale;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FewShotExample {
    pub source: String,
    pub entity_block: String,
    pub candidate: String,
    pub feedback_text: String,
    pub entity_score: u8,
    pub quality_score: u8,
}

impl FewShotExample {
    /// Scores in range, feedback parses, and parsed scores agree.
    pub fn validate(&self) -> Result<(), String> {
        if self.source.trim().is_empty() || self.candidate.trim().is_empty() {
            return Err("source and candidate must be non-empty".into());
        }
        if self.entity_score > MAX_CRITERION_SCORE || self.quality_score > MAX_CRITERION_SCORE {
            return Err("scores must be within 0-5".into());
        }
        let parsed =
            parse_feedback(&self.feedback_text).map_err(|e| format!("feedback_text: {e}"))?;
        if (parsed.entity_score, parsed.quality_score) != (self.entity_score, self.quality_score) {
            return Err(format!(
                "declared scores {}/{} differ from feedback_text scores {}/{}",
                self.entity_score, self.quality_score, parsed.entity_score, parsed.quality_score
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FewShotError {
    #[error("few-shot example {pair}#{index}: {cause}")]
    ExampleValidation {
        pair: String,
        index: usize,
        cause: String,
    },
    #[error("few-shot store {path}: {cause}")]
    Io { path: String, cause: String },
    #[error("few-shot store has no examples for {0}")]
    MissingFewShot(LanguagePair),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FewShotStore {
    pairs: BTreeMap<Locale, Vec<FewShotExample>>,
}

const BUILTIN: [(Locale, &str); 10] = [
    (
        Locale::Ar,
        include_str!("../../assets/fewshot/en-ar/examples.jsonl"),
    ),
    (
        Locale::De,
        include_str!("../../assets/fewshot/en-de/examples.jsonl"),
    ),
    (
        Locale::Es,
        include_str!("../../assets/fewshot/en-es/examples.jsonl"),
    ),
    (
        Locale::Fr,
        include_str!("../../assets/fewshot/en-fr/examples.jsonl"),
    ),
    (
        Locale::It,
        include_str!("../../assets/fewshot/en-it/examples.jsonl"),
    ),
    (
        Locale::Ja,
        include_str!("../../assets/fewshot/en-ja/examples.jsonl"),
    ),
    (
        Locale::Ko,
        include_str!("../../assets/fewshot/en-ko/examples.jsonl"),
    ),
    (
        Locale::Th,
        include_str!("../../assets/fewshot/en-th/examples.jsonl"),
    ),
    (
        Locale::Tr,
        include_str!("../../assets/fewshot/en-tr/examples.jsonl"),
    ),
    (
        Locale::Zh,
        include_str!("../../assets/fewshot/en-zh/examples.jsonl"),
    ),
];

fn parse_examples(
    pair: &str,
    text: &str,
    start_index: usize,
) -> Result<Vec<FewShotExample>, FewShotError> {
    let mut out = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let index = start_index + out.len();
        let err = |cause: String| FewShotError::ExampleValidation {
            pair: pair.to_string(),
            index,
            cause,
        };
        let example: FewShotExample = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
        example.validate().map_err(err)?;
        out.push(example);
    }
    Ok(out)
}

impl FewShotStore {
    /// The examples shipped with the crate, validated.
    pub fn builtin() -> Self {
        let mut store = FewShotStore::default();
        for (locale, text) in BUILTIN {
            let pair = LanguagePair::english_to(locale).expect("target locale");
            let examples = parse_examples(&pair.to_string(), text, 0)
                .expect("builtin few-shot examples are valid");
            store.pairs.insert(locale, examples);
        }
        store
    }

    pub fn insert(&mut self, pair: LanguagePair, examples: Vec<FewShotExample>) {
        self.pairs.insert(pair.target, examples);
    }

    /// Examples for `pair`, in store order; empty if none.
    pub fn examples(&self, pair: LanguagePair) -> &[FewShotExample] {
        self.pairs
            .get(&pair.target)
            .map(Vec::as_slice)
            .unwrap_or_default()
    }

    pub fn pairs(&self) -> Vec<LanguagePair> {
        self.pairs
            .keys()
            .map(|&l| LanguagePair::english_to(l).expect("target locale"))
            .collect()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.values().all(Vec::is_empty)
    }

    pub fn all_examples(&self) -> impl Iterator<Item = (LanguagePair, &FewShotExample)> {
        self.pairs.iter().flat_map(|(&l, v)| {
            let pair = LanguagePair::english_to(l).expect("target locale");
            v.iter().map(move |e| (pair, e))
        })
    }

    /// Writes the store in the directory layout `load_fewshot_store` reads.
    pub fn write_dir(&self, root: &Path) -> std::io::Result<()> {
        for pair in self.pairs() {
            let dir = root.join(pair.to_string());
            fs::create_dir_all(&dir)?;
            let mut text = String::new();
            for e in self.examples(pair) {
                text.push_str(&serde_json::to_string(e).map_err(std::io::Error::other)?);
                text.push('\n');
            }
            fs::write(dir.join("examples.jsonl"), text)?;
        }
        Ok(())
    }
}

/// Loads and validates a store directory.
///
/// Non-strict mode tolerates missing pairs and returns a warning for each;
/// strict mode requires all ten pairs.
pub fn load_fewshot_store(
    root: &Path,
    strict: bool,
) -> Result<(FewShotStore, Vec<String>), FewShotError> {
    let io_err = |path: &Path, e: std::io::Error| FewShotError::Io {
        path: path.display().to_string(),
        cause: e.to_string(),
    };
    let mut store = FewShotStore::default();
    let mut warnings = Vec::new();

    let mut dirs: Vec<_> = fs::read_dir(root)
        .map_err(|e| io_err(root, e))?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();

    for dir in dirs {
        let name = dir
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or_default()
            .to_string();
        let pair: LanguagePair = match name.parse() {
            Ok(p) => p,
            Err(e) => {
                warnings.push(format!("ignoring directory `{name}`: {e}"));
                continue;
            }
        };
        let mut files: Vec<_> = fs::read_dir(&dir)
            .map_err(|e| io_err(&dir, e))?
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| p.extension().and_then(|x| x.to_str()) == Some("jsonl"))
            .collect();
        files.sort();
        let mut examples = Vec::new();
        for file in files {
            let text = fs::read_to_string(&file).map_err(|e| io_err(&file, e))?;
            examples.extend(parse_examples(&pair.to_string(), &text, examples.len())?);
        }
        store.insert(pair, examples);
    }

    for locale in Locale::TARGETS {
        let pair = LanguagePair::english_to(locale).expect("target locale");
        if store.examples(pair).is_empty() {
            if strict {
                return Err(FewShotError::MissingFewShot(pair));
            }
            warnings.push(format!("no few-shot examples for {pair}"));
        }
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok((store, warnings))
}
