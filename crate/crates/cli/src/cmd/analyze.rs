//! `iotrace analyze`: offline per-file survey and access-phase detection.
//! With no selection flags, both analyses run.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use iotrace_core::analysis::{
    classify_access, detect_phases, AccessClass, AccessEvent, Direction, SurveyOptions,
    SurveyTable,
};
use iotrace_core::model::read_trace;
use iotrace_core::report::{aggregate, render};

use crate::access::{access_series, AccessPoint};

#[derive(clap::Args)]
pub struct Args {
    /// Unified trace file
    pub trace: PathBuf,
    /// Per-file survey: access classes, bytes, seek distances, times
    #[arg(long)]
    pub survey: bool,
    /// Access phases: maximal runs of one class and direction per file
    #[arg(long)]
    pub phases: bool,
    /// Layer to analyze
    #[arg(long, default_value = "POSIX")]
    pub layer: String,
}

fn class_label(c: AccessClass) -> &'static str {
    match c {
        AccessClass::Sequential => "sequential",
        AccessClass::RandomShortSeek => "random-short-seek",
        AccessClass::RandomLongSeek => "random-long-seek",
    }
}

fn direction_label(d: Direction) -> &'static str {
    match d {
        Direction::Read => "read",
        Direction::Write => "write",
    }
}

/// Splits one process's points into per-file streams, keeping first-seen
/// file order.
fn group_by_file(points: &[AccessPoint]) -> Vec<(String, Vec<&AccessPoint>)> {
    let mut order: Vec<(String, Vec<&AccessPoint>)> = Vec::new();
    for p in points {
        match order.iter_mut().find(|(f, _)| *f == p.file) {
            Some((_, v)) => v.push(p),
            None => order.push((p.file.clone(), vec![p])),
        }
    }
    order
}

pub fn run(args: Args) -> Result<ExitCode> {
    let (regs, activities) = read_trace(&args.trace)
        .with_context(|| format!("reading {}", args.trace.display()))?;
    let both = !args.survey && !args.phases;
    let opts = SurveyOptions::posix(&args.layer);

    if args.survey || both {
        let mut table = SurveyTable::new(&opts, &regs)?;
        for a in &activities {
            table.update(a);
        }
        let report = table.report(0);
        print!("{}", render(&aggregate::<f64>(&[report])?));
    }

    if args.phases || both {
        println!("# pid\tfile\tfirst\tlast\tclass\tdirection\tbytes");
        for series in access_series(&regs, &activities, &opts) {
            for (file, points) in group_by_file(&series.points) {
                let mut prev_end = 0u64;
                let events: Vec<AccessEvent> = points
                    .iter()
                    .map(|p| {
                        let class = classify_access(prev_end, p.offset, opts.short_seek_threshold);
                        prev_end = p.offset + p.len;
                        AccessEvent {
                            class,
                            direction: p.direction,
                            bytes: p.len,
                        }
                    })
                    .collect();
                for phase in detect_phases(&file, &events) {
                    println!(
                        "p{}\t{}\t{}\t{}\t{}\t{}\t{}",
                        series.pid,
                        phase.file,
                        phase.start_index,
                        phase.end_index,
                        class_label(phase.class),
                        direction_label(phase.direction),
                        phase.weight_bytes
                    );
                }
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
