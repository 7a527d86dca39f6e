//! `iotrace simulate`: cost generated workloads against a storage model,
//! optionally with the read-ahead advisor and the hint learning loop.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use iotrace_core::analysis::Direction;
use iotrace_core::optimize::{
    apply_data_sieving, gen_workload, simulate, AccessTrace, HintHistory, HintKey, HintSet,
    ModelParams, Pattern, SimResult, StorageModel, WorkloadSpec, DEFAULT_ADVICE_THRESHOLD,
    DEFAULT_LEARNING_MIN,
};

#[derive(clap::Args)]
pub struct Args {
    /// Workload spec (JSON)
    #[arg(long)]
    pub spec: PathBuf,
    /// Storage model calibration (JSON); built-in calibration when omitted
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Enable the read-ahead advisor and print the off/on comparison
    #[arg(long)]
    pub advisor: bool,
    /// Learn hint-set performance, then re-run with the best set applied
    #[arg(long)]
    pub optimize: bool,
    /// Run the spec under all four access patterns
    #[arg(long)]
    pub all_patterns: bool,
    /// Advisor confirmation threshold (consecutive constant strides)
    #[arg(long, default_value_t = DEFAULT_ADVICE_THRESHOLD)]
    pub threshold: u32,
    /// Print every access's simulated time
    #[arg(long)]
    pub per_access: bool,
}

fn pattern_label(p: Pattern) -> &'static str {
    match p {
        Pattern::IndependentContiguous => "independent-contiguous",
        Pattern::IndependentNonContiguous => "independent-non-contiguous",
        Pattern::CollectiveContiguous => "collective-contiguous",
        Pattern::CollectiveNonContiguous => "collective-non-contiguous",
    }
}

/// Mean per-access time over all processes, skipping each process's first
/// `skip` accesses.
fn mean_ns(res: &SimResult<f64>, skip: usize) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    for times in &res.per_access_ns {
        for t in times.iter().skip(skip) {
            sum += t;
            n += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn print_row(
    pattern: Pattern,
    advisor: &str,
    spec: &WorkloadSpec,
    res: &SimResult<f64>,
    steady_skip: usize,
) {
    let accesses: usize = res.per_access_ns.iter().map(Vec::len).sum();
    println!(
        "{}\t{}\t{}\t{}\t{}\t{}\t{:.1}\t{:.1}\t{:.1}\t{}\t{}",
        pattern_label(pattern),
        advisor,
        spec.processes,
        spec.blocks_per_process,
        spec.block_bytes,
        accesses,
        mean_ns(res, 0),
        mean_ns(res, steady_skip),
        res.wall_ns,
        res.advised_hits,
        res.prefetches_issued
    );
}

fn print_per_access(res: &SimResult<f64>) {
    for (rank, times) in res.per_access_ns.iter().enumerate() {
        for (i, t) in times.iter().enumerate() {
            println!("access\tp{rank}\t{i}\t{t:.1}");
        }
    }
}

fn print_sieving(spec: &WorkloadSpec, trace: &AccessTrace, per_cycle: bool) -> Result<()> {
    let Some(buffer) = spec.sieve_buffer_bytes else {
        return Ok(());
    };
    if spec.pattern.is_contiguous() || spec.direction != Direction::Write {
        return Ok(());
    }
    for proc in &trace.processes {
        let cycles = apply_data_sieving(&proc.accesses, buffer)?;
        let locked: u64 = cycles.iter().map(|c| c.lock_bytes).sum();
        let payload: u64 = cycles.iter().map(|c| c.payload_bytes).sum();
        println!(
            "sieve\tp{}\tcycles={}\tlocked_bytes={locked}\tpayload_bytes={payload}",
            proc.rank,
            cycles.len()
        );
        if per_cycle {
            for (i, c) in cycles.iter().enumerate() {
                println!(
                    "sieve-cycle\tp{}\t{i}\toffset={}\tlock_bytes={}\tblocks={}",
                    proc.rank, c.lock_offset, c.lock_bytes, c.merged_blocks
                );
            }
        }
    }
    Ok(())
}

fn render_hints(hints: &HintSet) -> String {
    if hints.0.is_empty() {
        return "(none)".to_string();
    }
    hints
        .0
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Learn-then-apply loop: observe each hint set's simulated performance,
/// then report which set a second run would open with.
fn optimize_loop(spec: &WorkloadSpec, wall_ns: f64, total_bytes: u64) -> Result<()> {
    if spec.hint_sets.is_empty() {
        println!("no hint sets in spec; nothing to learn");
        return Ok(());
    }
    let mut history = HintHistory::new();
    let class = match spec.direction {
        Direction::Read => "read",
        Direction::Write => "write",
    };
    let key = HintKey::new(class, 0, "workload");
    for e in &spec.hint_sets {
        let adjusted = (wall_ns / e.throughput_multiplier).max(1.0);
        for _ in 0..DEFAULT_LEARNING_MIN {
            history.observe(&key, &e.hints, total_bytes, adjusted as u64)?;
        }
        println!(
            "observed\t{}\twall_ns={adjusted:.1}\truns={DEFAULT_LEARNING_MIN}",
            render_hints(&e.hints)
        );
    }
    let best = history
        .best_hints(&key, DEFAULT_LEARNING_MIN)
        .context("no hint set reached the observation minimum")?;
    let chosen = spec
        .hint_sets
        .iter()
        .find(|e| e.hints == best)
        .context("learned hints missing from the spec")?;
    println!("best-hints\t{}", render_hints(&best));
    println!(
        "second-run\twall_ns={:.1}\tfirst_run_wall_ns={wall_ns:.1}",
        (wall_ns / chosen.throughput_multiplier).max(1.0)
    );
    Ok(())
}

pub fn run(args: Args) -> Result<ExitCode> {
    let spec = WorkloadSpec::from_file(&args.spec)
        .with_context(|| format!("loading {}", args.spec.display()))?;
    let params = match &args.model {
        Some(path) => {
            ModelParams::from_file(path).with_context(|| format!("loading {}", path.display()))?
        }
        None => ModelParams::default_calibration(),
    };
    let model = StorageModel::<f64>::from_params(&params)?;

    let patterns: Vec<Pattern> = if args.all_patterns {
        vec![
            Pattern::IndependentContiguous,
            Pattern::IndependentNonContiguous,
            Pattern::CollectiveContiguous,
            Pattern::CollectiveNonContiguous,
        ]
    } else {
        vec![spec.pattern]
    };

    println!(
        "# pattern\tadvisor\tprocs\tblocks\tblock_bytes\taccesses\tmean_ns\tsteady_ns\twall_ns\thits\tprefetches"
    );
    let mut spec_wall = 0.0;
    let mut spec_bytes = 0;
    for pattern in patterns {
        let mut s = spec.clone();
        s.pattern = pattern;
        let trace = gen_workload(&s)?;
        // The advisor confirms a stride after `threshold` repeats and covers
        // the following access, so steady state begins threshold + 2 in.
        let learn_skip = args.threshold as usize + 2;
        let res = if args.advisor {
            let off = simulate(&trace, &model, None);
            let on = simulate(&trace, &model, Some(args.threshold));
            print_row(pattern, "off", &s, &off, 1);
            print_row(pattern, "on", &s, &on, learn_skip);
            let (base, steady) = (mean_ns(&off, 1), mean_ns(&on, learn_skip));
            if base > 0.0 {
                println!(
                    "steady-reduction\t{}\t{:.1}%",
                    pattern_label(pattern),
                    (1.0 - steady / base) * 100.0
                );
            }
            on
        } else {
            let res = simulate(&trace, &model, None);
            print_row(pattern, "off", &s, &res, 1);
            res
        };
        if args.per_access {
            print_per_access(&res);
        }
        print_sieving(&s, &trace, args.per_access)?;
        if pattern == spec.pattern {
            spec_wall = res.wall_ns;
            spec_bytes = trace.total_bytes();
        }
    }

    if args.optimize {
        optimize_loop(&spec, spec_wall, spec_bytes)?;
    }
    Ok(ExitCode::SUCCESS)
}
