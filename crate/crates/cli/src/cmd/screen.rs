//! `iotrace screen`: flag jobstats rows that cross threshold rules.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use iotrace_core::analysis::{parse_rules, read_jobstats, screen_jobs};

#[derive(clap::Args)]
pub struct Args {
    /// Jobstats file, one JSON object per line
    pub jobstats: PathBuf,
    /// Rule file: one `field comparator threshold` rule per line
    #[arg(long)]
    pub rules: PathBuf,
}

pub fn run(args: Args) -> Result<ExitCode> {
    let rules = parse_rules(
        &fs::read_to_string(&args.rules)
            .with_context(|| format!("reading {}", args.rules.display()))?,
    )?;
    if rules.is_empty() {
        bail!("{} contains no rules", args.rules.display());
    }
    let file = fs::File::open(&args.jobstats)
        .with_context(|| format!("opening {}", args.jobstats.display()))?;
    let rows = read_jobstats(file)?;
    let flagged = screen_jobs(&rows, &rules);
    for f in &flagged {
        println!("{}\t{}", f.job, f.rules.join("; "));
    }
    eprintln!("{} of {} jobs flagged", flagged.len(), rows.len());
    Ok(if flagged.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}
