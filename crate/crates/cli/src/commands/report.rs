use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use ea_refine::eval::{format_method_table, ScoreReport};

use crate::common::write_file;
use crate::error::{CliError, UsageContext};

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// `report.json` files, one per method, in row order.
    #[arg(required = true)]
    pub reports: Vec<PathBuf>,
    /// Also write the table here.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

pub fn run(args: &ReportArgs) -> Result<(), CliError> {
    let mut reports = Vec::new();
    for path in &args.reports {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))
            .data()?;
        let report: ScoreReport = serde_json::from_str(&text)
            .with_context(|| format!("parsing {}", path.display()))
            .data()?;
        reports.push(report);
    }
    let table = format_method_table(&reports);
    print!("{table}");
    if let Some(path) = &args.output {
        write_file(path, &table)?;
    }
    Ok(())
}
