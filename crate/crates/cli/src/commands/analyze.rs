use std::path::PathBuf;

use clap::Args;
use ea_refine::eval::{analyze_label_similarity, MetaOutcome};

use crate::common::{
    load_corpus, open_cache, output_dir, read_jsonl, write_file, CacheArgs, CorpusArgs, Ctx,
};
use crate::error::CliError;

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[command(flatten)]
    pub cache: CacheArgs,
    /// `outcomes.jsonl` written by `evaluate`.
    #[arg(long)]
    pub outcomes: PathBuf,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

pub fn run(ctx: &Ctx, args: &AnalyzeArgs) -> Result<(), CliError> {
    let corpus = load_corpus(ctx, &args.corpus)?;
    let outcomes: Vec<MetaOutcome> = read_jsonl(&args.outcomes)?;
    let out = output_dir(ctx, args.output_dir.clone())?;
    let entities = open_cache(ctx, &args.cache)?.snapshot();

    let report = analyze_label_similarity(&corpus, &entities, &outcomes);
    write_file(
        &out.join("correlation.json"),
        &format!("{}\n", report.to_json()),
    )?;
    let table = report.to_text_table();
    write_file(&out.join("correlation.txt"), &table)?;
    print!("{table}");
    Ok(())
}
