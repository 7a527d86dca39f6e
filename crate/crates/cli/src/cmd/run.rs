//! `iotrace run`: replay a trace through a configured pipeline, cycle the
//! anomaly plugins at fixed activity intervals, then render all reports.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use iotrace_core::model::read_trace;
use iotrace_core::pipeline::{load_pipeline, PipelineConfig, PluginRegistry};
use iotrace_core::report::{aggregate, render};

#[derive(clap::Args)]
pub struct Args {
    /// Unified trace file to replay
    pub trace: PathBuf,
    /// Pipeline configuration (JSON)
    #[arg(long, env = "IOTRACE_CONFIG")]
    pub config: PathBuf,
    /// Also write the raw per-plugin reports, one JSON object per line
    #[arg(long)]
    pub report_out: Option<PathBuf>,
}

pub fn run(args: Args) -> Result<ExitCode> {
    let config = PipelineConfig::from_file(&args.config)
        .with_context(|| format!("loading {}", args.config.display()))?;
    let (regs, activities) = read_trace(&args.trace)
        .with_context(|| format!("reading {}", args.trace.display()))?;
    let pipeline = load_pipeline(&config, &PluginRegistry::builtin(), &regs)?;

    let cycle = pipeline.cycle_activities().max(1);
    let mut signals = 0usize;
    let mut since_cycle = 0u64;
    let mut last_t = 0u64;
    for a in &activities {
        last_t = a.t_stop;
        pipeline.publish(a.clone());
        since_cycle += 1;
        if since_cycle == cycle {
            pipeline.drain_async();
            signals += pipeline.run_cycle(last_t).len();
            since_cycle = 0;
        }
    }
    pipeline.drain_async();
    if since_cycle > 0 {
        signals += pipeline.run_cycle(last_t).len();
    }

    let reports = pipeline.plugin_reports();
    if let Some(path) = &args.report_out {
        let mut body = String::new();
        for r in &reports {
            body.push_str(&serde_json::to_string(r)?);
            body.push('\n');
        }
        fs::write(path, body)?;
    }
    print!("{}", render(&aggregate::<f64>(&reports)?));

    let rep = pipeline.report();
    println!(
        "pipeline: published={} delivered={} dropped={} queued={} signals={signals}",
        rep.published, rep.delivered, rep.dropped, rep.queued
    );
    let mut panics = 0;
    for l in &rep.listeners {
        println!(
            "listener {}{}: invocations={} panics={}",
            l.name,
            if l.asynchronous { " (async)" } else { "" },
            l.invocations,
            l.panics
        );
        panics += l.panics;
    }
    let clean = rep.dropped == 0 && signals == 0 && panics == 0;
    Ok(if clean {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}
