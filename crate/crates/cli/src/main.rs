//! `iotrace`: trace reading, translation, pipeline replay, simulation and
//! job screening from one binary.
//!
//! Exit codes are a stable contract: 0 on success, 1 when the command
//! completed but produced rejects or flags, 2 on usage or input errors.
//! Every command is deterministic given identical inputs.

mod access;
mod cmd;
mod plot;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "iotrace",
    version,
    about = "I/O trace analysis toolkit",
    after_help = "Exit codes: 0 success, 1 completed with rejects or flags, 2 usage or input error."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print a trace line by line, or plot its access pattern
    TraceRead(cmd::trace_read::Args),
    /// Translate a foreign trace into the unified format
    Translate(cmd::translate::Args),
    /// Replay a trace through a configured analysis pipeline
    Run(cmd::run::Args),
    /// Simulate a generated workload against a storage model
    Simulate(cmd::simulate::Args),
    /// Flag jobstats rows that cross threshold rules
    Screen(cmd::screen::Args),
    /// Offline analysis: per-file survey and access-phase detection
    Analyze(cmd::analyze::Args),
    /// Aggregate collected plugin reports and render them
    Report(cmd::report::Args),
}

fn main() -> ExitCode {
    // Rust ignores SIGPIPE by default, turning `iotrace ... | head` into a
    // broken-pipe panic. Restore the conventional silent death instead.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }

    let cli = Cli::parse();
    let result = match cli.command {
        Command::TraceRead(args) => cmd::trace_read::run(args),
        Command::Translate(args) => cmd::translate::run(args),
        Command::Run(args) => cmd::run::run(args),
        Command::Simulate(args) => cmd::simulate::run(args),
        Command::Screen(args) => cmd::screen::run(args),
        Command::Analyze(args) => cmd::analyze::run(args),
        Command::Report(args) => cmd::report::run(args),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
