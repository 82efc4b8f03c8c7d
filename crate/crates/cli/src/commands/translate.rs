use std::collections::BTreeMap;
use std::path::PathBuf;

use chrono::Utc;
use clap::Args;
use ea_refine::corpus::TaskInstance;
use ea_refine::llm::{run_ordered, Gateway};
use ea_refine::refine::{Decoding, ProvenanceRecord, RefineConfig, RefineEngine, StopReason};
use ea_refine::retry::RetryPolicy;
use ea_refine::wikidata::{EntityCache, WikidataClient};
use ea_refine::Locale;
use serde::Serialize;

use crate::common::{
    build_backend, jsonl, load_corpus, open_cache, output_dir, prompt_kit, wikidata_client,
    write_file, BackendArgs, CacheArgs, CorpusArgs, Ctx,
};
use crate::config::{pick, BackendKind};
use crate::error::CliError;

#[derive(Debug, Args)]
pub struct TranslateArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[command(flatten)]
    pub cache: CacheArgs,
    #[command(flatten)]
    pub backend: BackendArgs,
    /// Refinement rounds after the initial translation.
    #[arg(long)]
    pub max_refinements: Option<u32>,
    /// Re-asks allowed when feedback does not parse.
    #[arg(long)]
    pub feedback_retries: Option<u32>,
    #[arg(long)]
    pub templates_dir: Option<PathBuf>,
    #[arg(long)]
    pub fewshot_dir: Option<PathBuf>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct PredictionOut {
    id: String,
    prediction: String,
    stop_reason: StopReason,
    llm_calls: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn refine_config(ctx: &Ctx, args: &TranslateArgs, model: String) -> RefineConfig {
    let f = &ctx.file;
    let defaults = RefineConfig::default();
    let decoding = |t: Option<f64>| Decoding {
        temperature: t.unwrap_or(0.0),
        max_tokens: f.max_tokens.unwrap_or(Decoding::default().max_tokens),
    };
    RefineConfig {
        max_refinements: pick(
            args.max_refinements,
            &f.max_refinements,
            defaults.max_refinements,
        ),
        feedback_retry_limit: pick(
            args.feedback_retries,
            &f.feedback_retries,
            defaults.feedback_retry_limit,
        ),
        model_id: model,
        generation: decoding(f.generation_temperature),
        feedback: decoding(f.feedback_temperature),
        refinement: decoding(f.refinement_temperature),
    }
}

fn translate_one(
    engine: &RefineEngine,
    gateway: &Gateway,
    cache: &EntityCache,
    client: &WikidataClient,
    instance: &TaskInstance,
) -> (PredictionOut, ProvenanceRecord) {
    let failure = |error: String, llm_calls: u32| {
        log::warn!("{}: {error}", instance.id);
        let provenance = ProvenanceRecord {
            id: instance.id.clone(),
            candidates: Vec::new(),
            feedbacks: Vec::new(),
            stop_reason: StopReason::InstanceFailure,
            llm_calls,
            error: Some(error.clone()),
        };
        let prediction = PredictionOut {
            id: instance.id.clone(),
            prediction: String::new(),
            stop_reason: StopReason::InstanceFailure,
            llm_calls,
            error: Some(error),
        };
        (prediction, provenance)
    };

    let entity = match cache.get_or_fetch(client, &instance.wikidata_qid, &Locale::TARGETS) {
        Ok(lookup) => lookup.record,
        Err(e) => return failure(format!("entity unavailable: {e}"), 0),
    };
    match engine.run_loop(&entity, instance) {
        Ok(result) => {
            let provenance = ProvenanceRecord::from_result(&instance.id, &result);
            let prediction = PredictionOut {
                id: instance.id.clone(),
                prediction: result.final_translation,
                stop_reason: result.stop_reason,
                llm_calls: result.llm_calls,
                error: result.error,
            };
            (prediction, provenance)
        }
        Err(e) => {
            let attempted = !gateway.transcript().entries_for(&instance.id).is_empty();
            failure(e.to_string(), u32::from(attempted))
        }
    }
}

pub fn run(ctx: &Ctx, args: &TranslateArgs) -> Result<(), CliError> {
    let started_at = Utc::now();
    let corpus = load_corpus(ctx, &args.corpus)?;
    let out = output_dir(ctx, args.output_dir.clone())?;
    let cache = open_cache(ctx, &args.cache)?;
    let client = wikidata_client(ctx, &args.cache);
    let kit = prompt_kit(ctx, args.templates_dir.clone(), args.fewshot_dir.clone())?;
    let backend = build_backend(ctx, &args.backend)?;
    let config = refine_config(ctx, args, backend.model.clone());

    let gateway = Gateway::new(backend.backend.clone(), RetryPolicy::default(), ctx.seed);
    let engine = RefineEngine::new(&gateway, &kit, config.clone());
    let results = run_ordered(&corpus.instances, ctx.parallelism, |inst| {
        translate_one(&engine, &gateway, &cache, &client, inst)
    });

    let ids: Vec<String> = corpus.instances.iter().map(|i| i.id.clone()).collect();
    write_file(
        &out.join("predictions.jsonl"),
        &jsonl(results.iter().map(|(p, _)| p)),
    )?;
    write_file(
        &out.join("provenance.jsonl"),
        &jsonl(results.iter().map(|(_, p)| p)),
    )?;
    write_file(
        &out.join("transcript.jsonl"),
        &gateway.transcript().to_jsonl(&ids),
    )?;

    let failed = results
        .iter()
        .filter(|(p, _)| p.stop_reason == StopReason::InstanceFailure)
        .count();
    let mut stop_reasons: BTreeMap<&str, usize> = BTreeMap::new();
    for (p, _) in &results {
        *stop_reasons.entry(p.stop_reason.as_str()).or_default() += 1;
    }
    let meta = serde_json::json!({
        "started_at": started_at.to_rfc3339(),
        "finished_at": Utc::now().to_rfc3339(),
        "version": env!("CARGO_PKG_VERSION"),
        "backend": match backend.kind { BackendKind::Mock => "mock", BackendKind::Remote => "remote" },
        "model": config.model_id,
        "max_refinements": config.max_refinements,
        "feedback_retry_limit": config.feedback_retry_limit,
        "seed": ctx.seed,
        "parallelism": ctx.parallelism,
        "offline": ctx.offline,
        "instances": results.len(),
        "failed": failed,
        "stop_reasons": stop_reasons,
        "llm_calls": results.iter().map(|(p, _)| u64::from(p.llm_calls)).sum::<u64>(),
    });
    write_file(&out.join("run_meta.json"), &format!("{:#}\n", meta))?;

    eprintln!(
        "translated {} instances ({} failed); outputs in {}",
        results.len(),
        failed,
        out.display()
    );
    if !results.is_empty() && failed == results.len() {
        return Err(CliError::data("every instance failed"));
    }
    Ok(())
}
