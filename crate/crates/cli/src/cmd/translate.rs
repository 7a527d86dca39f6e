//! `iotrace translate`: run a translation program over a foreign trace and
//! write the unified result, with per-record rejects kept alongside.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use iotrace_core::lang::{
    open_source, parse_program, strace_mapping, strace_program, translate, SourceFormat,
    TargetMapping,
};
use iotrace_core::model::write_trace;

#[derive(Clone, Copy, PartialEq, ValueEnum)]
pub enum Format {
    Csv,
    Jsonl,
    Strace,
}

#[derive(clap::Args)]
pub struct Args {
    /// Source trace file
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub format: Format,
    /// Translation program; the bundled one is used for strace input
    #[arg(long)]
    pub program: Option<PathBuf>,
    /// Target mapping (JSON); the bundled one is used for strace input
    #[arg(long)]
    pub mapping: Option<PathBuf>,
    /// Unified trace output path
    #[arg(short, long)]
    pub out: PathBuf,
    /// Exit 0 even when some records were rejected
    #[arg(long)]
    pub allow_rejects: bool,
    /// Process id for the emitted activities
    #[arg(long)]
    pub pid: Option<u32>,
    /// CSV field delimiter
    #[arg(long, default_value_t = ',')]
    pub delimiter: char,
    /// CSV has no header row; columns are named c0..cN
    #[arg(long)]
    pub no_header: bool,
}

pub fn run(args: Args) -> Result<ExitCode> {
    let format = match args.format {
        Format::Csv => {
            if !args.delimiter.is_ascii() {
                bail!("CSV delimiter must be an ASCII character");
            }
            SourceFormat::Csv {
                delimiter: args.delimiter as u8,
                header: !args.no_header,
            }
        }
        Format::Jsonl => SourceFormat::JsonLines,
        Format::Strace => SourceFormat::StraceText,
    };

    let program = match &args.program {
        Some(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            parse_program(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None if args.format == Format::Strace => strace_program(),
        None => bail!("--program is required for csv and jsonl input"),
    };
    let mut mapping: TargetMapping = match &args.mapping {
        Some(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None if args.format == Format::Strace => strace_mapping(args.pid.unwrap_or(1)),
        None => bail!("--mapping is required for csv and jsonl input"),
    };
    if let Some(pid) = args.pid {
        mapping.pid = pid;
    }

    let cursor = open_source(&args.input, format)
        .with_context(|| format!("opening {}", args.input.display()))?;
    let result = translate(&cursor, &program, &mapping)?;
    write_trace(&args.out, &result.activities, &result.registries)?;

    let mut rejects_path = args.out.clone().into_os_string();
    rejects_path.push(".rejects");
    let rejects_path = PathBuf::from(rejects_path);
    let body: String = result
        .rejects
        .iter()
        .map(|r| format!("record {}: {}\n", r.record, r.reason))
        .collect();
    fs::write(&rejects_path, body)?;

    println!(
        "{} activities -> {}",
        result.activities.len(),
        args.out.display()
    );
    println!(
        "{} rejects -> {}",
        result.rejects.len(),
        rejects_path.display()
    );
    Ok(if result.rejects.is_empty() || args.allow_rejects {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}
