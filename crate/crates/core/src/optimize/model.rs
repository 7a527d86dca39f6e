//! Calibrated storage latency model.
//!
//! An access costs positioning plus transfer. Positioning grows linearly
//! with seek distance up to `d_max` and jumps by a fixed step beyond it,
//! matching the measured cliff between short and long seeks. An access
//! served from an advised (prefetched) extent costs a flat hit time
//! instead; keeping that hit time below the cheapest possible access is
//! what makes advice safe to enable.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

use super::OptimizeError;

/// Model parameters as stored in a calibration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub c0_ns: f64,
    pub c1_ns_per_byte: f64,
    pub d_max: u64,
    /// Extra cost of seeks beyond `d_max`; zero gives a plain capped-linear model.
    #[serde(default)]
    pub long_seek_step_ns: f64,
    pub bandwidth_bytes_per_ns: f64,
    pub hit_ns: f64,
}

const DEFAULT_CALIBRATION: &str = include_str!("../../config/model_default.json");

impl ModelParams {
    /// The calibration shipped with the crate.
    pub fn default_calibration() -> Self {
        serde_json::from_str(DEFAULT_CALIBRATION).expect("bundled calibration parses")
    }

    pub fn from_file(path: &Path) -> Result<Self, OptimizeError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Storage latency model over a chosen float width.
#[derive(Debug, Clone)]
pub struct StorageModel<T: Scalar> {
    c0: T,
    c1: T,
    d_max: u64,
    step: T,
    bandwidth: T,
    hit: T,
}

impl<T: Scalar> StorageModel<T> {
    pub fn from_params(p: &ModelParams) -> Result<Self, OptimizeError> {
        for (name, v) in [
            ("c0_ns", p.c0_ns),
            ("c1_ns_per_byte", p.c1_ns_per_byte),
            ("bandwidth_bytes_per_ns", p.bandwidth_bytes_per_ns),
            ("hit_ns", p.hit_ns),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(OptimizeError::BadParam(format!("{name} must be > 0, got {v}")));
            }
        }
        if p.d_max == 0 {
            return Err(OptimizeError::BadParam("d_max must be > 0".into()));
        }
        if !(p.long_seek_step_ns >= 0.0 && p.long_seek_step_ns.is_finite()) {
            return Err(OptimizeError::BadParam(format!(
                "long_seek_step_ns must be >= 0, got {}",
                p.long_seek_step_ns
            )));
        }
        // Advice must never slow an access down: the cheapest access costs at
        // least the zero-distance positioning time.
        if p.hit_ns >= p.c0_ns {
            return Err(OptimizeError::UnsafeHitCost {
                hit_ns: p.hit_ns,
                min_ns: p.c0_ns,
            });
        }
        let t = |v: f64| T::from_f64(v).expect("finite parameter fits the scalar");
        Ok(StorageModel {
            c0: t(p.c0_ns),
            c1: t(p.c1_ns_per_byte),
            d_max: p.d_max,
            step: t(p.long_seek_step_ns),
            bandwidth: t(p.bandwidth_bytes_per_ns),
            hit: t(p.hit_ns),
        })
    }

    /// Model built from the bundled calibration.
    pub fn default_calibrated() -> Self {
        Self::from_params(&ModelParams::default_calibration()).expect("bundled calibration is valid")
    }

    /// Head movement cost for a seek of `distance` bytes.
    pub fn positioning_ns(&self, distance: u64) -> T {
        let capped = T::from_u64_lossy(distance.min(self.d_max));
        let base = self.c0 + self.c1 * capped;
        if distance > self.d_max {
            base + self.step
        } else {
            base
        }
    }

    /// Pure data movement cost for `bytes`.
    pub fn transfer_ns(&self, bytes: u64) -> T {
        T::from_u64_lossy(bytes) / self.bandwidth
    }

    /// Full cost of an unadvised access.
    pub fn access_ns(&self, distance: u64, bytes: u64) -> T {
        self.positioning_ns(distance) + self.transfer_ns(bytes)
    }

    /// Flat cost of an access served from an advised extent.
    pub fn hit_ns(&self) -> T {
        self.hit
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_calibration_loads_and_validates() {
        let p = ModelParams::default_calibration();
        let m: StorageModel<f64> = StorageModel::from_params(&p).unwrap();
        assert!(m.hit_ns() < m.access_ns(0, 1));
    }

    #[test]
    fn positioning_is_monotone_and_capped_linear() {
        let m: StorageModel<f64> = StorageModel::default_calibrated();
        let mut last = 0.0;
        for d in [0u64, 1, 1024, 65536, 262144, 262145, 1 << 20, 1 << 30] {
            let p = m.positioning_ns(d);
            assert!(p >= last, "positioning must not decrease with distance");
            last = p;
        }
        // beyond the cap the distance term saturates
        assert_eq!(
            m.positioning_ns(1 << 21) - m.positioning_ns(1 << 20),
            0.0
        );
    }

    #[test]
    fn short_stride_cost_matches_the_measured_cell() {
        let m: StorageModel<f64> = StorageModel::default_calibrated();
        // steady state of 1 KiB reads every 20 KiB: head re-positions over the gap
        let t = m.access_ns(20 * 1024 - 1024, 1024);
        assert!((t - 97_100.0).abs() < 1.0, "got {t}");
    }

    #[test]
    fn long_stride_cost_matches_the_measured_cell() {
        let m: StorageModel<f64> = StorageModel::default_calibrated();
        let t = m.access_ns(1_024_000 - 1024, 1024);
        assert!((t - 7_855_700.0).abs() < 1.0, "got {t}");
    }

    #[test]
    fn invalid_parameters_are_refused() {
        let good = ModelParams::default_calibration();
        let mut p = good.clone();
        p.bandwidth_bytes_per_ns = 0.0;
        assert!(StorageModel::<f64>::from_params(&p).is_err());
        let mut p = good.clone();
        p.c0_ns = -1.0;
        assert!(StorageModel::<f64>::from_params(&p).is_err());
        let mut p = good.clone();
        p.d_max = 0;
        assert!(StorageModel::<f64>::from_params(&p).is_err());
    }

    #[test]
    fn unsafe_hit_cost_is_refused() {
        let mut p = ModelParams::default_calibration();
        p.hit_ns = p.c0_ns + 1.0;
        match StorageModel::<f64>::from_params(&p) {
            Err(OptimizeError::UnsafeHitCost { .. }) => {}
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn the_model_is_generic_over_the_float_width() {
        let m: StorageModel<f32> = StorageModel::default_calibrated();
        let t = m.access_ns(20 * 1024 - 1024, 1024);
        assert!((t - 97_100.0).abs() < 1.0, "got {t}");
    }
}
