//! Command-line front end for the `ea-refine` pipeline.

pub mod common;
pub mod config;
pub mod error;

mod commands {
    pub mod analyze;
    pub mod evaluate;
    pub mod fetch;
    pub mod fewshot;
    pub mod report;
    pub mod translate;
}

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::common::Ctx;
use crate::config::FileConfig;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "ea-refine",
    version,
    about = "Entity-aware translation with Wikidata retrieval and self-refinement"
)]
pub struct Cli {
    /// Flat TOML config; flags override its keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Never contact Wikidata or a remote model.
    #[arg(long, global = true)]
    pub offline: bool,
    /// Seed for retry jitter.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Instances processed concurrently.
    #[arg(long, global = true)]
    pub parallelism: Option<usize>,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fill the entity cache for every QID in the corpus.
    FetchEntities(commands::fetch::FetchArgs),
    /// Translate, critique and refine every instance.
    Translate(commands::translate::TranslateArgs),
    /// Score predictions with M-ETA and, optionally, COMET.
    Evaluate(commands::evaluate::EvaluateArgs),
    /// Correlate label edit distance with entity accuracy.
    Analyze(commands::analyze::AnalyzeArgs),
    /// Stage few-shot examples for other language pairs for review.
    FewshotGenerate(commands::fewshot::FewshotArgs),
    /// Combine several evaluation reports into one table.
    Report(commands::report::ReportArgs),
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let parallelism = cli.parallelism.or(file.parallelism).unwrap_or(1);
    if parallelism == 0 {
        return Err(CliError::usage("--parallelism must be at least 1"));
    }
    let ctx = Ctx {
        offline: cli.offline || file.offline.unwrap_or(false),
        seed: cli.seed.or(file.seed).unwrap_or(0),
        parallelism,
        file,
    };
    match &cli.command {
        Command::FetchEntities(a) => commands::fetch::run(&ctx, a),
        Command::Translate(a) => commands::translate::run(&ctx, a),
        Command::Evaluate(a) => commands::evaluate::run(&ctx, a),
        Command::Analyze(a) => commands::analyze::run(&ctx, a),
        Command::FewshotGenerate(a) => commands::fewshot::run(&ctx, a),
        Command::Report(a) => commands::report::run(a),
    }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .try_init();
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
