//! Self-optimization building blocks and their evaluation harness.
//!
//! Hint-set learning keyed by operation class, user and file extension;
//! stride-predictive read-ahead; a calibrated storage latency model with an
//! access simulator; and workload generators for the benchmark patterns the
//! simulator is exercised with.

mod hints;
mod model;
mod sim;
mod stream;
mod workload;

pub use hints::{HintHistory, HintKey, HintSet, PerfSnapshot, DEFAULT_LEARNING_MIN};
pub use model::{ModelParams, StorageModel};
pub use sim::{simulate, SimResult};
pub use stream::{ReadAheadAdvice, StreamTracker, DEFAULT_ADVICE_THRESHOLD};
pub use workload::{
    apply_data_sieving, gen_workload, Access, AccessTrace, HintExperiment, Pattern, ProcessTrace,
    SieveCycle, WorkloadSpec,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum OptimizeError {
    #[error("observation duration must be positive")]
    BadDuration,
    #[error("sieve buffer of {buffer} bytes cannot hold a {block} byte block")]
    BufferTooSmall { block: u64, buffer: u64 },
    #[error("bad model parameter: {0}")]
    BadParam(String),
    #[error("advised-hit cost {hit_ns} ns must stay below the minimum access cost {min_ns} ns")]
    UnsafeHitCost { hit_ns: f64, min_ns: f64 },
    #[error("bad workload spec: {0}")]
    BadSpec(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("parse: {0}")]
    Parse(#[from] serde_json::Error),
}
