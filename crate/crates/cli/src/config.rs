//! Run configuration: a flat TOML file overlaid by command-line flags.
//!
//! Relative paths in the file resolve against the file's directory.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Remote,
    Mock,
}

/// Every key is optional; unknown keys are rejected.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub corpus: Option<Vec<PathBuf>>,
    pub split: Option<String>,
    pub field_aliases: Option<String>,
    pub max_instances: Option<usize>,

    pub cache_dir: Option<PathBuf>,
    pub wikidata_url: Option<String>,
    pub wikidata_rate: Option<f64>,

    pub backend: Option<BackendKind>,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub mock_script: Option<PathBuf>,
    pub mock_mode: Option<String>,
    pub request_timeout_secs: Option<u64>,

    pub templates_dir: Option<PathBuf>,
    pub fewshot_dir: Option<PathBuf>,
    pub max_refinements: Option<u32>,
    pub feedback_retries: Option<u32>,
    pub generation_temperature: Option<f64>,
    pub feedback_temperature: Option<f64>,
    pub refinement_temperature: Option<f64>,
    pub max_tokens: Option<u32>,

    pub scorer_url: Option<String>,
    pub method: Option<String>,

    pub output_dir: Option<PathBuf>,
    pub parallelism: Option<usize>,
    pub seed: Option<u64>,
    pub offline: Option<bool>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))
            .map_err(CliError::Usage)?;
        let mut config: FileConfig = toml::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))
            .map_err(CliError::Usage)?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in self.corpus.iter_mut().flatten() {
            fix(p);
        }
        for p in [
            &mut self.cache_dir,
            &mut self.mock_script,
            &mut self.templates_dir,
            &mut self.fewshot_dir,
            &mut self.output_dir,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        if let Some(url) = &self.wikidata_url {
            if let Some(dir) = url.strip_prefix("fixture:") {
                let dir = Path::new(dir);
                if dir.is_relative() {
                    self.wikidata_url = Some(format!("fixture:{}", base.join(dir).display()));
                }
            }
        }
    }
}

/// Picks the flag value, then the file value, then the default.
pub fn pick<T: Clone>(flag: Option<T>, file: &Option<T>, default: T) -> T {
    flag.or_else(|| file.clone()).unwrap_or(default)
}

pub fn require<T: Clone>(flag: Option<T>, file: &Option<T>, what: &str) -> Result<T, CliError> {
    match flag.or_else(|| file.clone()) {
        Some(v) => Ok(v),
        None => Err(CliError::usage(format!(
            "{what} is required (flag or config key)"
        ))),
    }
}

pub fn check_backend(
    backend: BackendKind,
    mock_script: Option<&Path>,
    offline: bool,
) -> anyhow::Result<()> {
    match backend {
        BackendKind::Mock if mock_script.is_none() => {
            bail!("the mock backend requires a script (--mock-script)")
        }
        BackendKind::Remote if offline => bail!("offline mode cannot use the remote backend"),
        _ => Ok(()),
    }
}
