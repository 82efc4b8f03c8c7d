use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use clap::Args;
use ea_refine::eval::{evaluate, ExternalScorer, HttpScorer, PredictionLine};
use ea_refine::http::UreqTransport;

use crate::common::{
    jsonl, load_corpus, open_cache, output_dir, read_jsonl, write_file, CacheArgs, CorpusArgs, Ctx,
};
use crate::config::pick;
use crate::error::CliError;

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[command(flatten)]
    pub cache: CacheArgs,
    /// Predictions JSONL with `id` and `prediction` fields.
    #[arg(long)]
    pub predictions: PathBuf,
    /// Base URL of the COMET scoring service; COMET is omitted without it.
    #[arg(long)]
    pub scorer_url: Option<String>,
    /// Row label for the report, e.g. `+Refine`.
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

pub fn run(ctx: &Ctx, args: &EvaluateArgs) -> Result<(), CliError> {
    let corpus = load_corpus(ctx, &args.corpus)?;
    let predictions: Vec<PredictionLine> = read_jsonl(&args.predictions)?;
    let out = output_dir(ctx, args.output_dir.clone())?;
    let entities = open_cache(ctx, &args.cache)?.snapshot();
    let method = pick(args.method.clone(), &ctx.file.method, "system".into());

    let scorer: Option<HttpScorer> = args
        .scorer_url
        .clone()
        .or_else(|| ctx.file.scorer_url.clone())
        .map(|url| {
            let secs = ctx.file.request_timeout_secs.unwrap_or(300);
            HttpScorer::new(
                &url,
                Arc::new(UreqTransport::new(Duration::from_secs(secs))),
            )
        });
    let evaluation = evaluate(
        &corpus,
        &predictions,
        &entities,
        scorer.as_ref().map(|s| s as &dyn ExternalScorer),
        &method,
    );
    let report = &evaluation.report;

    write_file(&out.join("report.json"), &format!("{}\n", report.to_json()))?;
    let table = report.to_text_table();
    write_file(&out.join("report.txt"), &table)?;
    write_file(&out.join("outcomes.jsonl"), &jsonl(&evaluation.outcomes))?;
    print!("{table}");

    for id in &report.unknown_ids {
        log::warn!("prediction id `{id}` is not in the corpus");
    }
    if report.joined == 0 {
        return Err(CliError::data("no prediction joined a corpus instance"));
    }
    Ok(())
}
