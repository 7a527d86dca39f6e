//! `iotrace report`: merge raw plugin reports (as written by
//! `run --report-out`) across files and render the aggregation.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use iotrace_core::report::{aggregate, render, Report};

#[derive(clap::Args)]
pub struct Args {
    /// Report files, one JSON object per line
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
}

pub fn run(args: Args) -> Result<ExitCode> {
    let mut reports: Vec<Report> = Vec::new();
    for path in &args.files {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            reports.push(
                serde_json::from_str(line)
                    .with_context(|| format!("{}:{}", path.display(), i + 1))?,
            );
        }
    }
    print!("{}", render(&aggregate::<f64>(&reports)?));
    Ok(ExitCode::SUCCESS)
}
