//! Multi-resolution runtime statistics.
//!
//! Metrics are sampled into a five-level history. Level 0 holds raw samples;
//! every tenth completed sample at level k emits one aggregated sample at
//! level k+1 (mean for gauges, sum for counter-deltas). Each level keeps a
//! ring of its last ten samples, so a metric never stores more than fifty
//! samples while offering progressively coarser views of the past.

mod collect;
mod util;

pub use collect::{
    write_sample_batch, Collector, ConstantProvider, NoiseProvider, ProviderError, RampProvider,
    ReplayProvider, Sample, StatisticsProvider,
};
pub use util::{summarize_utilization, Capacities, ResourceSnapshot, UtilizationSummary};

use std::collections::HashMap;
use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

/// Number of resolution levels.
pub const LEVELS: usize = 5;

/// Ring capacity per level.
pub const RING: usize = 10;

/// Nominal sampling periods per level, coarsest last.
pub const LEVEL_PERIODS_NS: [u64; LEVELS] = [
    100_000_000,
    1_000_000_000,
    10_000_000_000,
    60_000_000_000,
    600_000_000_000,
];

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("metric {metric} time went backwards: {t} after {last}")]
    TimeRegression { metric: MetricId, t: u64, last: u64 },
    #[error("level {0} out of range 0..5")]
    BadLevel(u32),
    #[error("unknown metric {0:?}")]
    UnknownMetric(String),
    #[error("capacity must be positive")]
    BadCapacity,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("bad sample batch line {line}: {reason}")]
    BadBatch { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MetricId(pub u32);

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// How samples of a metric aggregate upward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricSemantics {
    /// Instantaneous level; windows aggregate to their arithmetic mean.
    Gauge,
    /// Increment since the previous sample; windows aggregate to their sum.
    CounterDelta,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metric {
    pub id: MetricId,
    pub name: String,
    pub semantics: MetricSemantics,
    pub unit: String,
}

/// Registry of metrics; names are unique and semantics fixed at registration.
#[derive(Debug, Default, Clone)]
pub struct MetricRegistry {
    metrics: Vec<Metric>,
    by_name: HashMap<String, MetricId>,
}

impl MetricRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(
        &mut self,
        name: &str,
        semantics: MetricSemantics,
        unit: &str,
    ) -> Result<MetricId, StatsError> {
        if let Some(&id) = self.by_name.get(name) {
            let existing = &self.metrics[id.0 as usize];
            if existing.semantics != semantics {
                return Err(StatsError::UnknownMetric(format!(
                    "{name} already registered with different semantics"
                )));
            }
            return Ok(id);
        }
        let id = MetricId(self.metrics.len() as u32);
        self.metrics.push(Metric {
            id,
            name: name.to_string(),
            semantics,
            unit: unit.to_string(),
        });
        self.by_name.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn lookup(&self, name: &str) -> Option<MetricId> {
        self.by_name.get(name).copied()
    }

    pub fn get(&self, id: MetricId) -> Option<&Metric> {
        self.metrics.get(id.0 as usize)
    }

    pub fn metrics(&self) -> &[Metric] {
        &self.metrics
    }
}

#[derive(Debug, Clone)]
struct Level<T> {
    ring: VecDeque<(u64, T)>,
    window_sum: T,
    window_count: u32,
}

impl<T: Scalar> Default for Level<T> {
    fn default() -> Self {
        Level {
            ring: VecDeque::with_capacity(RING),
            window_sum: T::zero(),
            window_count: 0,
        }
    }
}

/// Five-level ring history of one metric.
#[derive(Debug, Clone)]
pub struct MultiResolutionHistory<T: Scalar> {
    semantics: MetricSemantics,
    levels: [Level<T>; LEVELS],
    last_t: Option<u64>,
}

impl<T: Scalar> MultiResolutionHistory<T> {
    pub fn new(semantics: MetricSemantics) -> Self {
        MultiResolutionHistory {
            semantics,
            levels: Default::default(),
            last_t: None,
        }
    }

    pub fn semantics(&self) -> MetricSemantics {
        self.semantics
    }

    /// Appends a sample at time `t` (ns, non-decreasing) and cascades
    /// completed windows upward.
    pub fn record(&mut self, metric: MetricId, value: T, t: u64) -> Result<(), StatsError> {
        if let Some(last) = self.last_t {
            if t < last {
                return Err(StatsError::TimeRegression { metric, t, last });
            }
        }
        self.last_t = Some(t);
        let mut carry = Some((t, value));
        for level in self.levels.iter_mut() {
            let Some((t, v)) = carry else { break };
            if level.ring.len() == RING {
                level.ring.pop_front();
            }
            level.ring.push_back((t, v));
            level.window_sum = level.window_sum + v;
            level.window_count += 1;
            carry = if level.window_count == RING as u32 {
                let agg = match self.semantics {
                    MetricSemantics::Gauge => {
                        level.window_sum / T::from_usize(RING).unwrap()
                    }
                    MetricSemantics::CounterDelta => level.window_sum,
                };
                level.window_sum = T::zero();
                level.window_count = 0;
                Some((t, agg))
            } else {
                None
            };
        }
        Ok(())
    }

    /// Returns up to `last_k` samples of `level`, newest first, as
    /// `(window end ns, value)` pairs. Partial windows are never visible.
    pub fn query(&self, level: u32, last_k: usize) -> Result<Vec<(u64, T)>, StatsError> {
        let l = self
            .levels
            .get(level as usize)
            .ok_or(StatsError::BadLevel(level))?;
        let k = last_k.min(RING);
        Ok(l.ring.iter().rev().take(k).copied().collect())
    }

    /// Total samples currently stored across all levels.
    pub fn stored_samples(&self) -> usize {
        self.levels.iter().map(|l| l.ring.len()).sum()
    }
}
