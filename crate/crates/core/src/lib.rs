//! Toolkit for capturing, unifying and analyzing parallel I/O activity.
//!
//! The crate is organized around a small set of cooperating modules:
//!
//! * [`model`]: the unified activity model and its self-describing trace format
//! * [`lang`]: lazy ingestion of foreign trace formats plus a small translation language
//! * [`pipeline`]: in-process fan-out of activities to analysis plugins
//! * [`stats`]: multi-resolution runtime statistics with bounded memory
//! * [`analysis`]: access pattern analytics, runtime histograms and anomaly reasoning
//! * [`optimize`]: access prediction, hint learning and a calibrated storage cost model
//! * [`report`]: structured plugin reports, cross-process aggregation and rendering
//!
//! Numeric kernels are generic over a floating point [`Scalar`]; the aliases
//! below fix them to `f64` for everyday use.

pub mod analysis;
pub mod lang;
pub mod model;
pub mod optimize;
pub mod pipeline;
pub mod report;
pub mod scalar;
pub mod stats;

pub use scalar::Scalar;

/// Multi-resolution metric history over `f64` samples.
pub type History = stats::MultiResolutionHistory<f64>;

/// Storage cost model evaluated in `f64`.
pub type CostModel = optimize::StorageModel<f64>;

/// Resource utilization summary in `f64` fractions.
pub type Utilization = stats::UtilizationSummary<f64>;

/// Report aggregation entry over `f64`.
pub type Aggregate = report::AggregateEntry<f64>;
