//! `iotrace trace-read`: print a trace line by line or plot its accesses.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::ValueEnum;
use iotrace_core::analysis::SurveyOptions;
use iotrace_core::model::{read_trace, render_line};

use crate::{access, plot};

#[derive(Clone, Copy, PartialEq, ValueEnum)]
pub enum Plugin {
    /// One line per activity on stdout
    Print,
    /// Per-process series files plus an offset/time SVG
    Plot,
}

#[derive(clap::Args)]
pub struct Args {
    /// Unified trace file
    pub trace: PathBuf,
    #[arg(long, value_enum, default_value_t = Plugin::Print)]
    pub plugin: Plugin,
    /// Directory plot output is written into
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Layer whose accesses are plotted
    #[arg(long, default_value = "POSIX")]
    pub layer: String,
}

pub fn run(args: Args) -> Result<ExitCode> {
    let (regs, activities) = read_trace(&args.trace)
        .with_context(|| format!("reading {}", args.trace.display()))?;
    match args.plugin {
        Plugin::Print => {
            let stdout = std::io::stdout();
            let mut out = stdout.lock();
            for a in &activities {
                let line = render_line(a, &regs)?;
                writeln!(out, "{line}")?;
            }
        }
        Plugin::Plot => {
            let series = access::access_series(&regs, &activities, &SurveyOptions::posix(&args.layer));
            let stem = args
                .trace
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "trace".to_string());
            fs::create_dir_all(&args.out)?;
            for path in plot::write_series(&args.out, &stem, &series)? {
                println!("{}", path.display());
            }
            let svg = plot::write_svg(&args.out, &stem, &series)?;
            println!("{}", svg.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}
