use clap::Args;
use ea_refine::Locale;
use serde::Serialize;

use crate::common::{
    jsonl, load_corpus, open_cache, wikidata_client, write_file, CacheArgs, CorpusArgs, Ctx,
};
use crate::error::CliError;

#[derive(Debug, Args)]
pub struct FetchArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[command(flatten)]
    pub cache: CacheArgs,
}

#[derive(Debug, Serialize)]
struct Failure {
    qid: String,
    error: String,
}

#[derive(Debug, Serialize)]
pub struct FetchSummary {
    pub fetched: usize,
    pub cached: usize,
    pub failed: usize,
    failures: Vec<Failure>,
    persist_errors: Vec<String>,
}

pub fn run(ctx: &Ctx, args: &FetchArgs) -> Result<(), CliError> {
    let corpus = load_corpus(ctx, &args.corpus)?;
    let cache = open_cache(ctx, &args.cache)?;
    let client = wikidata_client(ctx, &args.cache);
    let mut summary = FetchSummary {
        fetched: 0,
        cached: 0,
        failed: 0,
        failures: Vec::new(),
        persist_errors: Vec::new(),
    };
    for qid in corpus.distinct_qids() {
        match cache.get_or_fetch(&client, &qid, &Locale::TARGETS) {
            Ok(lookup) if lookup.from_cache => summary.cached += 1,
            Ok(lookup) => {
                summary.fetched += 1;
                if let Some(e) = lookup.persist_error {
                    summary.persist_errors.push(format!("{qid}: {e}"));
                }
            }
            Err(e) => {
                log::warn!("{qid}: {e}");
                summary.failed += 1;
                summary.failures.push(Failure {
                    qid: qid.to_string(),
                    error: e.to_string(),
                });
            }
        }
    }
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    println!("{text}");
    if let Some(dir) = cache.storage_path() {
        write_file(&dir.join("fetch_summary.json"), &format!("{text}\n"))?;
        let log = client.fetch_log();
        if !log.is_empty() {
            write_file(&dir.join("fetch_log.jsonl"), &jsonl(log))?;
        }
    }
    if summary.failed > 0 {
        let total = summary.failed + summary.fetched + summary.cached;
        return Err(CliError::data(format!(
            "{} of {total} entities could not be fetched",
            summary.failed
        )));
    }
    Ok(())
}
