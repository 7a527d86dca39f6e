//! Cycle-based anomaly reasoning over speed-category counts.
//!
//! Each polling cycle merges the category counts of the local anomaly
//! detectors with the health reports of neighbor reasoners and raises a
//! signal when slow activity dominates.

use serde::{Deserialize, Serialize};

use super::SpeedCategory;

/// Scope a reasoner aggregates over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReasonerRole {
    Process,
    Node,
    System,
}

/// Category counts one anomaly detector contributes for the current cycle.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AdpiAggregate {
    /// Indexed by [`SpeedCategory::index`].
    pub counts: [u64; 5],
}

impl AdpiAggregate {
    pub fn add(&mut self, category: SpeedCategory) {
        self.counts[category.index()] += 1;
    }

    pub fn categorized(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Merged per-category health of one reasoner's scope for one cycle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HealthReport {
    pub role: ReasonerRole,
    pub reasoner: String,
    pub cycle_t_ns: u64,
    pub counts: [u64; 5],
}

impl HealthReport {
    pub fn categorized(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Raised when slow activity dominates a cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalySignal {
    pub scope: ReasonerRole,
    pub reasoner: String,
    pub cycle_t_ns: u64,
    /// Fraction of categorized activities that were slow or very slow.
    pub severity: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct ReasonerOptions {
    /// Minimum (slow + very-slow) fraction that raises a signal.
    pub trigger_fraction: f64,
    /// Minimum categorized activities per cycle before signaling at all.
    pub min_activities: u64,
}

impl Default for ReasonerOptions {
    fn default() -> Self {
        ReasonerOptions {
            trigger_fraction: 0.25,
            min_activities: 10,
        }
    }
}

/// Merges one cycle's detector aggregates with neighbor reports and decides
/// whether to raise an anomaly signal.
pub fn reason(
    role: ReasonerRole,
    reasoner: &str,
    cycle_t_ns: u64,
    aggregates: &[AdpiAggregate],
    neighbor_reports: &[HealthReport],
    opts: &ReasonerOptions,
) -> (HealthReport, Option<AnomalySignal>) {
    let mut counts = [0u64; 5];
    for agg in aggregates {
        for (total, c) in counts.iter_mut().zip(agg.counts) {
            *total += c;
        }
    }
    for rep in neighbor_reports {
        for (total, c) in counts.iter_mut().zip(rep.counts) {
            *total += c;
        }
    }
    let health = HealthReport {
        role,
        reasoner: reasoner.to_string(),
        cycle_t_ns,
        counts,
    };
    let categorized = health.categorized();
    let slow = counts[SpeedCategory::Slow.index()] + counts[SpeedCategory::VerySlow.index()];
    let signal = if categorized >= opts.min_activities && categorized > 0 {
        let severity = slow as f64 / categorized as f64;
        (severity >= opts.trigger_fraction).then(|| AnomalySignal {
            scope: role,
            reasoner: reasoner.to_string(),
            cycle_t_ns,
            severity,
        })
    } else {
        None
    };
    (health, signal)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn agg(counts: [u64; 5]) -> AdpiAggregate {
        AdpiAggregate { counts }
    }

    #[test]
    fn all_normal_raises_nothing() {
        let (health, signal) = reason(
            ReasonerRole::Process,
            "r0",
            1000,
            &[agg([0, 0, 50, 0, 0])],
            &[],
            &ReasonerOptions::default(),
        );
        assert!(signal.is_none());
        assert_eq!(health.counts, [0, 0, 50, 0, 0]);
    }

    #[test]
    fn half_very_slow_triggers() {
        let (_, signal) = reason(
            ReasonerRole::Process,
            "r0",
            1000,
            &[agg([0, 0, 5, 0, 5])],
            &[],
            &ReasonerOptions::default(),
        );
        let signal = signal.expect("0.5 >= 0.25 must signal");
        assert_eq!(signal.severity, 0.5);
        assert_eq!(signal.scope, ReasonerRole::Process);
    }

    #[test]
    fn below_activity_floor_stays_quiet() {
        let (_, signal) = reason(
            ReasonerRole::Process,
            "r0",
            1000,
            &[agg([0, 0, 0, 0, 4])],
            &[],
            &ReasonerOptions::default(),
        );
        assert!(signal.is_none(), "4 activities < min 10");
    }

    #[test]
    fn neighbor_counts_join_the_fraction() {
        // locally quiet: 2 slow of 8; neighbor adds 6 slow of 8
        let neighbor = HealthReport {
            role: ReasonerRole::Process,
            reasoner: "r1".into(),
            cycle_t_ns: 1000,
            counts: [0, 0, 2, 0, 6],
        };
        let (health, signal) = reason(
            ReasonerRole::Node,
            "node0",
            1000,
            &[agg([0, 0, 6, 2, 0])],
            &[neighbor],
            &ReasonerOptions::default(),
        );
        assert_eq!(health.categorized(), 16);
        let signal = signal.expect("8/16 >= 0.25");
        assert_eq!(signal.severity, 0.5);
        assert_eq!(signal.scope, ReasonerRole::Node);
    }

    #[test]
    fn exact_trigger_fraction_signals() {
        let (_, signal) = reason(
            ReasonerRole::System,
            "sys",
            0,
            &[agg([0, 0, 9, 3, 0])],
            &[],
            &ReasonerOptions::default(),
        );
        assert!(signal.is_some(), "3/12 == 0.25 and >= is inclusive");
    }
}
