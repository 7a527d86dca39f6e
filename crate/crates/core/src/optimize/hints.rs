//! Learned hint sets per operation context.
//!
//! Observations pair the hint set active during an access with the achieved
//! throughput. Once a hint set has enough observations for a context, the one
//! with the best mean throughput is recommended for subsequent opens.
//! Means are kept as exact rationals so comparisons never suffer from
//! accumulation error.

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use super::OptimizeError;

/// Observations required before a hint set may be recommended.
pub const DEFAULT_LEARNING_MIN: u64 = 3;

/// An ordered set of hint name/value pairs; equal contents compare equal
/// regardless of insertion order.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HintSet(pub BTreeMap<String, String>);

impl HintSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, value: &str) -> Self {
        self.0.insert(name.to_string(), value.to_string());
        self
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.0.get(name).map(String::as_str)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Context a hint observation is filed under.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HintKey {
    pub op_class: String,
    pub user: u32,
    /// Lower-cased file name extension including the dot, or empty.
    pub extension: String,
}

impl HintKey {
    pub fn new(op_class: &str, user: u32, path: &str) -> Self {
        HintKey {
            op_class: op_class.to_string(),
            user,
            extension: extension_of(path),
        }
    }
}

/// Lower-cased extension of the path's basename, with the dot; empty when the
/// basename has none (leading dots do not count).
fn extension_of(path: &str) -> String {
    let base = path.rsplit('/').next().unwrap_or(path);
    match base.rfind('.') {
        Some(i) if i > 0 => base[i..].to_lowercase(),
        _ => String::new(),
    }
}

#[derive(Debug, Clone)]
struct PerfRecord {
    count: u64,
    mean: BigRational,
    last: BigRational,
    last_seen: u64,
}

/// Mean and latest throughput of one hint set, in bytes per nanosecond.
#[derive(Debug, Clone, PartialEq)]
pub struct PerfSnapshot {
    pub count: u64,
    pub mean_bytes_per_ns: f64,
    pub last_bytes_per_ns: f64,
}

/// Per-context performance history of hint sets.
#[derive(Debug, Clone, Default)]
pub struct HintHistory {
    records: HashMap<HintKey, HashMap<HintSet, PerfRecord>>,
    clock: u64,
}

impl HintHistory {
    pub fn new() -> Self {
        Self::default()
    }

    /// Files one access observation under its context and active hint set.
    pub fn observe(
        &mut self,
        key: &HintKey,
        hints: &HintSet,
        bytes: u64,
        duration_ns: u64,
    ) -> Result<(), OptimizeError> {
        if duration_ns == 0 {
            return Err(OptimizeError::BadDuration);
        }
        self.clock += 1;
        let throughput = BigRational::new(BigInt::from(bytes), BigInt::from(duration_ns));
        let by_set = self.records.entry(key.clone()).or_default();
        match by_set.get_mut(hints) {
            Some(rec) => {
                let n = BigInt::from(rec.count);
                rec.mean = (&rec.mean * &n + &throughput) / (n + 1);
                rec.count += 1;
                rec.last = throughput;
                rec.last_seen = self.clock;
            }
            None => {
                by_set.insert(
                    hints.clone(),
                    PerfRecord {
                        count: 1,
                        mean: throughput.clone(),
                        last: throughput,
                        last_seen: self.clock,
                    },
                );
            }
        }
        Ok(())
    }

    /// The hint set with the best mean throughput among those observed at
    /// least `learning_min` times; ties go to the most recently observed.
    pub fn best_hints(&self, key: &HintKey, learning_min: u64) -> Option<HintSet> {
        self.records
            .get(key)?
            .iter()
            .filter(|(_, rec)| rec.count >= learning_min)
            .max_by(|(_, a), (_, b)| a.mean.cmp(&b.mean).then(a.last_seen.cmp(&b.last_seen)))
            .map(|(set, _)| set.clone())
    }

    /// Observation summary for one (context, hint set) pair.
    pub fn snapshot(&self, key: &HintKey, hints: &HintSet) -> Option<PerfSnapshot> {
        let rec = self.records.get(key)?.get(hints)?;
        Some(PerfSnapshot {
            count: rec.count,
            mean_bytes_per_ns: rec.mean.to_f64().unwrap_or(f64::NAN),
            last_bytes_per_ns: rec.last.to_f64().unwrap_or(f64::NAN),
        })
    }

    pub fn contexts(&self) -> impl Iterator<Item = &HintKey> {
        self.records.keys()
    }
}
