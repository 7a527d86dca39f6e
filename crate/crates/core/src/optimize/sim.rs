//! Deterministic access-time simulation over a storage model.
//!
//! Each process's accesses are costed in stream order. With the advisor
//! enabled, a stride predictor runs alongside each read stream; predicted
//! extents are prefetched off the critical path and a later access inside
//! one costs only the flat hit time. Collective traces synchronize per
//! block round: the round takes as long as its slowest member.

use crate::analysis::Direction;
use crate::scalar::Scalar;

use super::{AccessTrace, ReadAheadAdvice, StorageModel, StreamTracker};

/// Simulation outcome: per-access and aggregated times in nanoseconds.
#[derive(Debug, Clone)]
pub struct SimResult<T> {
    /// `per_access_ns[p][i]` is the cost of process p's i-th access.
    pub per_access_ns: Vec<Vec<T>>,
    /// Sum of each process's own access times.
    pub per_process_ns: Vec<T>,
    /// End-to-end time: the slowest process, or the sum of per-round maxima
    /// when the trace synchronizes on barriers.
    pub wall_ns: T,
    pub advised_hits: u64,
    pub prefetches_issued: u64,
}

impl<T: Scalar> SimResult<T> {
    /// Mean access time of one process, skipping the first `skip` accesses
    /// (useful for steady-state figures that exclude cold starts).
    pub fn mean_access_ns(&self, process: usize, skip: usize) -> T {
        let times = &self.per_access_ns[process][skip..];
        let sum = times.iter().fold(T::zero(), |acc, &t| acc + t);
        sum / T::from_u64_lossy(times.len() as u64)
    }
}

/// Runs the trace against the model. `advice_threshold` enables the
/// read-ahead advisor with the given confirmation threshold.
pub fn simulate<T: Scalar>(
    trace: &AccessTrace,
    model: &StorageModel<T>,
    advice_threshold: Option<u32>,
) -> SimResult<T> {
    let mut per_access_ns = Vec::with_capacity(trace.processes.len());
    let mut advised_hits = 0u64;
    let mut prefetches_issued = 0u64;
    for proc in &trace.processes {
        let mut tracker = advice_threshold.map(StreamTracker::new);
        let mut pending: Vec<ReadAheadAdvice> = Vec::new();
        let mut head = 0u64;
        let mut times = Vec::with_capacity(proc.accesses.len());
        for a in &proc.accesses {
            let hit = pending
                .iter()
                .position(|adv| adv.offset <= a.offset && a.offset + a.len <= adv.offset + adv.len);
            let cost = match hit {
                Some(i) => {
                    pending.swap_remove(i);
                    advised_hits += 1;
                    model.hit_ns()
                }
                None => model.access_ns(a.offset.abs_diff(head), a.len),
            };
            times.push(cost);
            head = a.offset + a.len;
            if a.direction == Direction::Read {
                if let Some(tracker) = tracker.as_mut() {
                    if let Some(adv) = tracker.track_and_advise(proc.rank as u64, a.offset, a.len) {
                        // prefetched off the critical path: no cost added here
                        pending.push(adv);
                        prefetches_issued += 1;
                    }
                }
            }
        }
        per_access_ns.push(times);
    }
    let per_process_ns: Vec<T> = per_access_ns
        .iter()
        .map(|times| times.iter().fold(T::zero(), |acc, &t| acc + t))
        .collect();
    let wall_ns = if trace.has_barriers() {
        let rounds = per_access_ns.iter().map(Vec::len).max().unwrap_or(0);
        (0..rounds).fold(T::zero(), |acc, i| {
            let round_max = per_access_ns
                .iter()
                .filter_map(|times| times.get(i))
                .fold(T::zero(), |m, &t| if t > m { t } else { m });
            acc + round_max
        })
    } else {
        per_process_ns
            .iter()
            .fold(T::zero(), |m, &t| if t > m { t } else { m })
    };
    SimResult {
        per_access_ns,
        per_process_ns,
        wall_ns,
        advised_hits,
        prefetches_issued,
    }
}
