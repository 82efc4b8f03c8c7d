use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::Context;
use clap::Args;
use ea_refine::corpus::{load_corpus_with_aliases, Corpus, FieldAliases, Split};
use ea_refine::http::{HttpTransport, UreqTransport};
use ea_refine::llm::{ChatBackend, MockBackend, MockMode, OpenAiCompatibleBackend};
use ea_refine::prompt::{load_fewshot_store, FewShotStore, PromptKit, TemplateSet};
use ea_refine::retry::RetryPolicy;
use ea_refine::wikidata::{
    EntityCache, FixtureTransport, WikidataClient, DEFAULT_BASE_URL, DEFAULT_RATE_PER_SEC,
};
use serde::Serialize;

use crate::config::{check_backend, pick, require, BackendKind, FileConfig};
use crate::error::{CliError, UsageContext};

/// Global settings shared by every command.
pub struct Ctx {
    pub file: FileConfig,
    pub offline: bool,
    pub seed: u64,
    pub parallelism: usize,
}

#[derive(Debug, Clone, Args)]
pub struct CorpusArgs {
    /// Corpus JSONL file; repeat for several files.
    #[arg(long = "corpus")]
    pub corpus: Vec<PathBuf>,
    /// Split label: train, valid or test.
    #[arg(long)]
    pub split: Option<String>,
    /// Field renames applied before validation, e.g. `src=source,qid=wikidata_id`.
    #[arg(long)]
    pub field_aliases: Option<String>,
    /// Use only the first N instances.
    #[arg(long)]
    pub max_instances: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct CacheArgs {
    /// Entity cache directory.
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    /// Wikidata REST base URL, or `fixture:<dir>` to serve recorded items.
    #[arg(long)]
    pub wikidata_url: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct BackendArgs {
    #[arg(long, value_enum)]
    pub backend: Option<BackendKind>,
    /// OpenAI-compatible base URL for the remote backend.
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    /// Scripted responses for the mock backend (JSONL).
    #[arg(long)]
    pub mock_script: Option<PathBuf>,
    /// `fifo` or `keyed`.
    #[arg(long)]
    pub mock_mode: Option<String>,
}

pub const DEFAULT_ENDPOINT: &str = "https://api.openai.com/v1";
pub const DEFAULT_MODEL: &str = "gpt-4o";

pub fn load_corpus(ctx: &Ctx, args: &CorpusArgs) -> Result<Corpus, CliError> {
    let paths = if args.corpus.is_empty() {
        require(None, &ctx.file.corpus, "--corpus")?
    } else {
        args.corpus.clone()
    };
    let split: Split = pick(args.split.clone(), &ctx.file.split, "valid".into())
        .parse()
        .map_err(CliError::usage)?;
    let aliases = match args
        .field_aliases
        .clone()
        .or_else(|| ctx.file.field_aliases.clone())
    {
        Some(spec) => FieldAliases::parse(&spec).map_err(CliError::usage)?,
        None => FieldAliases::default(),
    };

    let mut instances = Vec::new();
    let mut seen = HashSet::new();
    for path in &paths {
        let loaded = load_corpus_with_aliases(path, split, &aliases).map_err(CliError::data)?;
        for e in &loaded.report.errors {
            log::warn!("{}:{}: {}", path.display(), e.line, e.error);
        }
        for inst in loaded.corpus.instances {
            if !seen.insert(inst.id.clone()) {
                return Err(CliError::data(format!(
                    "duplicate id `{}` in {}",
                    inst.id,
                    path.display()
                )));
            }
            instances.push(inst);
        }
    }
    if let Some(n) = args.max_instances.or(ctx.file.max_instances) {
        instances.truncate(n);
    }
    Ok(Corpus::new(split, instances))
}

pub fn open_cache(ctx: &Ctx, args: &CacheArgs) -> Result<EntityCache, CliError> {
    match args
        .cache_dir
        .clone()
        .or_else(|| ctx.file.cache_dir.clone())
    {
        Some(dir) => {
            let (cache, warnings) = EntityCache::open(&dir)
                .with_context(|| format!("opening entity cache {}", dir.display()))
                .data()?;
            for w in warnings {
                log::warn!("{w}");
            }
            Ok(cache)
        }
        None => Ok(EntityCache::in_memory()),
    }
}

fn http_transport(ctx: &Ctx) -> Arc<dyn HttpTransport> {
    let secs = ctx.file.request_timeout_secs.unwrap_or(60);
    Arc::new(UreqTransport::new(Duration::from_secs(secs)))
}

pub fn wikidata_client(ctx: &Ctx, args: &CacheArgs) -> WikidataClient {
    let url = pick(
        args.wikidata_url.clone(),
        &ctx.file.wikidata_url,
        DEFAULT_BASE_URL.into(),
    );
    let (base, transport): (String, Arc<dyn HttpTransport>) = match url.strip_prefix("fixture:") {
        Some(dir) => (
            "fixture://wikidata".into(),
            Arc::new(FixtureTransport::new(dir)),
        ),
        None => (url, http_transport(ctx)),
    };
    let rate = ctx.file.wikidata_rate.unwrap_or(DEFAULT_RATE_PER_SEC);
    WikidataClient::new(base, transport)
        .with_retry(RetryPolicy::default(), ctx.seed)
        .with_rate_limit((rate > 0.0).then_some(rate))
        .offline(ctx.offline)
}

pub struct BackendChoice {
    pub backend: Arc<dyn ChatBackend>,
    pub kind: BackendKind,
    pub model: String,
}

pub fn build_backend(ctx: &Ctx, args: &BackendArgs) -> Result<BackendChoice, CliError> {
    let kind = pick(args.backend, &ctx.file.backend, BackendKind::Remote);
    let script = args
        .mock_script
        .clone()
        .or_else(|| ctx.file.mock_script.clone());
    check_backend(kind, script.as_deref(), ctx.offline).usage()?;
    let model = pick(args.model.clone(), &ctx.file.model, DEFAULT_MODEL.into());
    let backend: Arc<dyn ChatBackend> = match kind {
        BackendKind::Mock => {
            let mode: MockMode = pick(args.mock_mode.clone(), &ctx.file.mock_mode, "fifo".into())
                .parse()
                .map_err(CliError::usage)?;
            if mode == MockMode::Fifo && ctx.parallelism > 1 {
                log::warn!("a FIFO mock script with parallelism > 1 depends on scheduling; use --mock-mode keyed");
            }
            let path = script.expect("checked above");
            Arc::new(MockBackend::from_file(&path, mode).map_err(CliError::usage)?)
        }
        BackendKind::Remote => {
            let endpoint = pick(
                args.endpoint.clone(),
                &ctx.file.endpoint,
                DEFAULT_ENDPOINT.into(),
            );
            Arc::new(OpenAiCompatibleBackend::from_env(
                endpoint,
                http_transport(ctx),
            ))
        }
    };
    Ok(BackendChoice {
        backend,
        kind,
        model,
    })
}

pub fn load_fewshot(ctx: &Ctx, dir: Option<PathBuf>) -> Result<FewShotStore, CliError> {
    match dir.or_else(|| ctx.file.fewshot_dir.clone()) {
        Some(dir) => {
            let (store, _) = load_fewshot_store(&dir, false).map_err(CliError::usage)?;
            Ok(store)
        }
        None => Ok(FewShotStore::builtin()),
    }
}

pub fn prompt_kit(
    ctx: &Ctx,
    templates: Option<PathBuf>,
    fewshot: Option<PathBuf>,
) -> Result<PromptKit, CliError> {
    let templates = match templates.or_else(|| ctx.file.templates_dir.clone()) {
        Some(dir) => TemplateSet::load_dir(&dir).map_err(CliError::usage)?,
        None => TemplateSet::builtin(),
    };
    Ok(PromptKit::new(templates, load_fewshot(ctx, fewshot)?))
}

pub fn output_dir(ctx: &Ctx, flag: Option<PathBuf>) -> Result<PathBuf, CliError> {
    let dir = require(flag, &ctx.file.output_dir, "--output-dir")?;
    fs::create_dir_all(&dir)
        .with_context(|| format!("creating {}", dir.display()))
        .data()?;
    Ok(dir)
}

pub fn jsonl<T: Serialize>(items: impl IntoIterator<Item = T>) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(&item).expect("record serializes"));
        out.push('\n');
    }
    out
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    let mut f = fs::File::create(path)
        .with_context(|| format!("creating {}", path.display()))
        .data()?;
    f.write_all(contents.as_bytes())
        .with_context(|| format!("writing {}", path.display()))
        .data()
}

pub fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .data()?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(line)
            .with_context(|| format!("{}:{}", path.display(), i + 1))
            .data()?;
        out.push(item);
    }
    Ok(out)
}
