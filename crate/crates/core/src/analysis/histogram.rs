//! Learned runtime distributions per operation kind.
//!
//! Each operation kind accumulates a bounded, sorted sample set of observed
//! durations. Once enough samples exist, new durations are placed into one of
//! five speed categories by comparing against empirical percentiles.

use std::collections::HashMap;

use crate::model::Ucaid;

use super::AnalysisError;

/// Relative speed of one activity against the learned distribution of its kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SpeedCategory {
    VeryFast,
    Fast,
    Normal,
    Slow,
    VerySlow,
}

impl SpeedCategory {
    pub const ALL: [SpeedCategory; 5] = [
        SpeedCategory::VeryFast,
        SpeedCategory::Fast,
        SpeedCategory::Normal,
        SpeedCategory::Slow,
        SpeedCategory::VerySlow,
    ];

    pub fn index(self) -> usize {
        match self {
            SpeedCategory::VeryFast => 0,
            SpeedCategory::Fast => 1,
            SpeedCategory::Normal => 2,
            SpeedCategory::Slow => 3,
            SpeedCategory::VerySlow => 4,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SpeedCategory::VeryFast => "very-fast",
            SpeedCategory::Fast => "fast",
            SpeedCategory::Normal => "normal",
            SpeedCategory::Slow => "slow",
            SpeedCategory::VerySlow => "very-slow",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct HistogramOptions {
    /// Samples required before categorization is meaningful.
    pub min_samples: usize,
    /// Learning stops once this many samples are stored, keeping the
    /// distribution stable and the memory bounded.
    pub max_samples: usize,
}

impl Default for HistogramOptions {
    fn default() -> Self {
        HistogramOptions {
            min_samples: 20,
            max_samples: 4096,
        }
    }
}

/// Per-operation-kind duration distributions with percentile categorization.
#[derive(Debug, Clone, Default)]
pub struct RuntimeHistogram {
    opts: HistogramOptions,
    samples: HashMap<Ucaid, Vec<u64>>,
}

impl RuntimeHistogram {
    pub fn new(opts: HistogramOptions) -> Self {
        RuntimeHistogram {
            opts,
            samples: HashMap::new(),
        }
    }

    /// Adds one observed duration. Ignored once the kind's sample set is full.
    pub fn learn(&mut self, ucaid: Ucaid, duration_ns: u64) {
        let set = self.samples.entry(ucaid).or_default();
        if set.len() >= self.opts.max_samples {
            return;
        }
        let at = set.partition_point(|&s| s <= duration_ns);
        set.insert(at, duration_ns);
    }

    pub fn sample_count(&self, ucaid: Ucaid) -> usize {
        self.samples.get(&ucaid).map_or(0, Vec::len)
    }

    /// Number of operation kinds with at least one learned sample.
    pub fn kind_count(&self) -> usize {
        self.samples.len()
    }

    /// Empirical nearest-rank percentile of the learned set, `q` in (0, 100].
    fn percentile(sorted: &[u64], q: u32) -> u64 {
        let n = sorted.len();
        let rank = (q as usize * n).div_ceil(100).max(1);
        sorted[rank - 1]
    }

    /// Categorizes a duration against the learned distribution of its kind.
    pub fn categorize(
        &self,
        ucaid: Ucaid,
        duration_ns: u64,
    ) -> Result<SpeedCategory, AnalysisError> {
        let set = self.samples.get(&ucaid).map(Vec::as_slice).unwrap_or(&[]);
        if set.len() < self.opts.min_samples {
            return Err(AnalysisError::InsufficientSamples {
                have: set.len(),
                need: self.opts.min_samples,
            });
        }
        let p5 = Self::percentile(set, 5);
        let p25 = Self::percentile(set, 25);
        let p75 = Self::percentile(set, 75);
        let p95 = Self::percentile(set, 95);
        Ok(if duration_ns < p5 {
            SpeedCategory::VeryFast
        } else if duration_ns < p25 {
            SpeedCategory::Fast
        } else if duration_ns <= p75 {
            SpeedCategory::Normal
        } else if duration_ns <= p95 {
            SpeedCategory::Slow
        } else {
            SpeedCategory::VerySlow
        })
    }
}
