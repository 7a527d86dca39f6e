//! Access pattern analytics over the activity stream.
//!
//! Covers access classification, per-file survey accounting, runtime
//! histograms with speed categories, phase detection, the anomaly reasoner
//! and jobstats-style screening.

mod histogram;
mod reason;
mod screen;
mod survey;

pub use histogram::{HistogramOptions, RuntimeHistogram, SpeedCategory};
pub use reason::{
    reason, AdpiAggregate, AnomalySignal, HealthReport, ReasonerOptions, ReasonerRole,
};
pub use screen::{
    parse_rules, read_jobstats, screen_jobs, FlaggedJob, JobStatsRow, RuleField, RuleOp,
    ScreeningRule,
};
pub use survey::{SurveyOptions, SurveyTable};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("unknown file handle {handle} (process {pid})")]
    UnknownFileHandle { pid: u32, handle: u64 },
    #[error("no component registered for layer {0:?}")]
    UnknownLayer(String),
    #[error("{have} samples learned, {need} required")]
    InsufficientSamples { have: usize, need: usize },
    #[error("bad screening rule {rule:?}: {reason}")]
    BadRule { rule: String, reason: String },
    #[error("bad jobstats line {line}: {reason}")]
    BadJobStats { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Transfer direction of a data access.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Read,
    Write,
}

/// Spatial class of one data access relative to the previous file position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AccessClass {
    Sequential,
    RandomShortSeek,
    RandomLongSeek,
}

impl AccessClass {
    pub const ALL: [AccessClass; 3] = [
        AccessClass::Sequential,
        AccessClass::RandomShortSeek,
        AccessClass::RandomLongSeek,
    ];

    pub fn index(self) -> usize {
        match self {
            AccessClass::Sequential => 0,
            AccessClass::RandomShortSeek => 1,
            AccessClass::RandomLongSeek => 2,
        }
    }
}

/// Default boundary between short and long seeks.
pub const DEFAULT_SHORT_SEEK_THRESHOLD: u64 = 1 << 20;

/// Classifies one access by its seek distance from `prev_end` (the byte after
/// the previous access; 0 for the first access to a file).
pub fn classify_access(prev_end: u64, offset: u64, short_seek_threshold: u64) -> AccessClass {
    assert!(short_seek_threshold > 0, "threshold must be positive");
    if offset == prev_end {
        AccessClass::Sequential
    } else if offset.abs_diff(prev_end) <= short_seek_threshold {
        AccessClass::RandomShortSeek
    } else {
        AccessClass::RandomLongSeek
    }
}

/// One classified access, input to phase detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AccessEvent {
    pub class: AccessClass,
    pub direction: Direction,
    pub bytes: u64,
}

/// A maximal run of accesses sharing class and direction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Phase {
    pub file: String,
    /// Index range into the access stream, inclusive on both ends.
    pub start_index: usize,
    pub end_index: usize,
    pub class: AccessClass,
    pub direction: Direction,
    pub weight_bytes: u64,
}

/// Splits one file's time-ordered access stream into maximal homogeneous
/// phases; adjacent phases differ in `(class, direction)` and the phases
/// cover the stream without overlap.
pub fn detect_phases(file: &str, events: &[AccessEvent]) -> Vec<Phase> {
    let mut phases: Vec<Phase> = Vec::new();
    for (i, e) in events.iter().enumerate() {
        match phases.last_mut() {
            Some(p) if p.class == e.class && p.direction == e.direction => {
                p.end_index = i;
                p.weight_bytes += e.bytes;
            }
            _ => phases.push(Phase {
                file: file.to_string(),
                start_index: i,
                end_index: i,
                class: e.class,
                direction: e.direction,
                weight_bytes: e.bytes,
            }),
        }
    }
    phases
}
