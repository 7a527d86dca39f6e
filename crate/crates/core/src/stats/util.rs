//! Qualitative utilization: four high-level fractions from raw counters.

use super::StatsError;
use crate::scalar::Scalar;

/// Raw per-resource readings over one observation window.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ResourceSnapshot {
    pub cpu_busy_ns: u64,
    pub cpu_total_ns: u64,
    pub mem_used_bytes: u64,
    pub mem_total_bytes: u64,
    pub io_bytes_per_s: f64,
    pub net_bytes_per_s: f64,
}

/// Configured capacities the throughput readings are normalized against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Capacities {
    pub io_bytes_per_s: f64,
    pub net_bytes_per_s: f64,
}

/// Utilization fractions, each clamped to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtilizationSummary<T: Scalar> {
    pub cpu: T,
    pub memory: T,
    pub io: T,
    pub network: T,
}

/// Reduces raw readings to four fractions. Zero denominators in the raw
/// readings yield zero; configured capacities must be positive.
pub fn summarize_utilization<T: Scalar>(
    snapshot: &ResourceSnapshot,
    capacities: &Capacities,
) -> Result<UtilizationSummary<T>, StatsError> {
    if capacities.io_bytes_per_s <= 0.0 || capacities.net_bytes_per_s <= 0.0 {
        return Err(StatsError::BadCapacity);
    }
    let clamp = |v: T| v.max(T::zero()).min(T::one());
    let frac_u64 = |num: u64, den: u64| {
        if den == 0 {
            T::zero()
        } else {
            clamp(T::ratio_u64(num, den))
        }
    };
    let frac_f64 = |num: f64, den: f64| {
        clamp(T::from_f64(num / den).unwrap_or_else(T::zero))
    };
    Ok(UtilizationSummary {
        cpu: frac_u64(snapshot.cpu_busy_ns, snapshot.cpu_total_ns),
        memory: frac_u64(snapshot.mem_used_bytes, snapshot.mem_total_bytes),
        io: frac_f64(snapshot.io_bytes_per_s, capacities.io_bytes_per_s),
        network: frac_f64(snapshot.net_bytes_per_s, capacities.net_bytes_per_s),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const CAPS: Capacities = Capacities {
        io_bytes_per_s: 1e9,
        net_bytes_per_s: 1e9,
    };

    #[test]
    fn all_zero_raw_is_all_zero() {
        let s = ResourceSnapshot::default();
        let u = summarize_utilization::<f64>(&s, &CAPS).unwrap();
        assert_eq!((u.cpu, u.memory, u.io, u.network), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn io_at_capacity_is_one() {
        let s = ResourceSnapshot {
            io_bytes_per_s: 1e9,
            ..Default::default()
        };
        let u = summarize_utilization::<f64>(&s, &CAPS).unwrap();
        assert_eq!(u.io, 1.0);
    }

    #[test]
    fn io_over_capacity_clamps_to_one() {
        let s = ResourceSnapshot {
            io_bytes_per_s: 2e9,
            ..Default::default()
        };
        let u = summarize_utilization::<f64>(&s, &CAPS).unwrap();
        assert_eq!(u.io, 1.0);
    }

    #[test]
    fn fractions_reflect_ratios() {
        let s = ResourceSnapshot {
            cpu_busy_ns: 250,
            cpu_total_ns: 1000,
            mem_used_bytes: 1 << 30,
            mem_total_bytes: 4 << 30,
            io_bytes_per_s: 5e8,
            net_bytes_per_s: 0.0,
        };
        let u = summarize_utilization::<f64>(&s, &CAPS).unwrap();
        assert_eq!((u.cpu, u.memory, u.io, u.network), (0.25, 0.25, 0.5, 0.0));
    }

    #[test]
    fn bad_capacity_is_refused() {
        let s = ResourceSnapshot::default();
        let caps = Capacities {
            io_bytes_per_s: 0.0,
            net_bytes_per_s: 1.0,
        };
        assert!(matches!(
            summarize_utilization::<f64>(&s, &caps),
            Err(StatsError::BadCapacity)
        ));
    }
}
