//! The polling collector and its bundled statistics providers.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{MetricId, MetricRegistry, MultiResolutionHistory, StatsError};
use crate::scalar::Scalar;

/// Error a provider may return from one poll; the collector records it and
/// keeps polling the others.
#[derive(Debug, Clone)]
pub struct ProviderError(pub String);

/// Source of metric samples, polled once per collection tick.
pub trait StatisticsProvider: Send {
    fn name(&self) -> &str;
    fn poll(&mut self, t: u64) -> Result<Vec<(MetricId, f64)>, ProviderError>;
}

/// One collected sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: u64,
    pub metric: MetricId,
    pub value: f64,
}

/// Owns the metric histories and polls registered providers.
pub struct Collector<T: Scalar> {
    registry: MetricRegistry,
    histories: HashMap<MetricId, MultiResolutionHistory<T>>,
    providers: Vec<Box<dyn StatisticsProvider>>,
    errors: Vec<u64>,
}

impl<T: Scalar> Collector<T> {
    pub fn new(registry: MetricRegistry) -> Self {
        Collector {
            registry,
            histories: HashMap::new(),
            providers: Vec::new(),
            errors: Vec::new(),
        }
    }

    pub fn registry(&self) -> &MetricRegistry {
        &self.registry
    }

    pub fn add_provider(&mut self, provider: Box<dyn StatisticsProvider>) {
        self.providers.push(provider);
        self.errors.push(0);
    }

    /// Error count per provider, index-aligned with registration order.
    pub fn provider_errors(&self) -> &[u64] {
        &self.errors
    }

    /// Polls every provider once at virtual time `t`, feeds the histories and
    /// returns the batch. A failing provider is counted and skipped.
    pub fn collect(&mut self, t: u64) -> Result<Vec<Sample>, StatsError> {
        let mut batch = Vec::new();
        for (i, p) in self.providers.iter_mut().enumerate() {
            match p.poll(t) {
                Ok(samples) => {
                    for (metric, value) in samples {
                        batch.push(Sample { t, metric, value });
                    }
                }
                Err(_) => self.errors[i] += 1,
            }
        }
        for s in &batch {
            self.record(s.metric, s.value, s.t)?;
        }
        Ok(batch)
    }

    /// Feeds one sample directly, creating the history on first use.
    pub fn record(&mut self, metric: MetricId, value: f64, t: u64) -> Result<(), StatsError> {
        let semantics = self
            .registry
            .get(metric)
            .ok_or_else(|| StatsError::UnknownMetric(format!("id {metric}")))?
            .semantics;
        let h = self
            .histories
            .entry(metric)
            .or_insert_with(|| MultiResolutionHistory::new(semantics));
        h.record(metric, T::from_f64(value).unwrap_or_else(T::zero), t)
    }

    /// Snapshot query; see [`MultiResolutionHistory::query`].
    pub fn query(
        &self,
        metric: MetricId,
        level: u32,
        last_k: usize,
    ) -> Result<Vec<(u64, T)>, StatsError> {
        match self.histories.get(&metric) {
            Some(h) => h.query(level, last_k),
            None if level < super::LEVELS as u32 => Ok(Vec::new()),
            None => Err(StatsError::BadLevel(level)),
        }
    }

    pub fn history(&self, metric: MetricId) -> Option<&MultiResolutionHistory<T>> {
        self.histories.get(&metric)
    }
}

/// Provider emitting a fixed value for one metric.
pub struct ConstantProvider {
    pub metric: MetricId,
    pub value: f64,
}

impl StatisticsProvider for ConstantProvider {
    fn name(&self) -> &str {
        "constant"
    }

    fn poll(&mut self, _t: u64) -> Result<Vec<(MetricId, f64)>, ProviderError> {
        Ok(vec![(self.metric, self.value)])
    }
}

/// Provider emitting `start + slope * t_seconds` for one metric.
pub struct RampProvider {
    pub metric: MetricId,
    pub start: f64,
    pub slope_per_s: f64,
}

impl StatisticsProvider for RampProvider {
    fn name(&self) -> &str {
        "ramp"
    }

    fn poll(&mut self, t: u64) -> Result<Vec<(MetricId, f64)>, ProviderError> {
        let secs = t as f64 / 1e9;
        Ok(vec![(self.metric, self.start + self.slope_per_s * secs)])
    }
}

/// Seeded uniform noise in `[lo, hi)`, deterministic for a given seed.
pub struct NoiseProvider {
    metric: MetricId,
    lo: f64,
    hi: f64,
    rng: ChaCha8Rng,
}

impl NoiseProvider {
    pub fn new(metric: MetricId, lo: f64, hi: f64, seed: u64) -> Self {
        NoiseProvider {
            metric,
            lo,
            hi,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl StatisticsProvider for NoiseProvider {
    fn name(&self) -> &str {
        "noise"
    }

    fn poll(&mut self, _t: u64) -> Result<Vec<(MetricId, f64)>, ProviderError> {
        Ok(vec![(self.metric, self.rng.random_range(self.lo..self.hi))])
    }
}

#[derive(Deserialize)]
struct BatchLine {
    t: u64,
    metric: String,
    value: f64,
}

/// Replays a sample-batch file: one JSON object per line `{t, metric, value}`.
/// Each poll emits every recorded sample with `t` up to the poll time that
/// was not delivered yet.
pub struct ReplayProvider {
    entries: Vec<(u64, MetricId, f64)>,
    next: usize,
}

impl ReplayProvider {
    pub fn from_path(
        path: impl AsRef<Path>,
        registry: &MetricRegistry,
    ) -> Result<Self, StatsError> {
        let text = fs::read_to_string(path)?;
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let parsed: BatchLine = serde_json::from_str(line).map_err(|e| {
                StatsError::BadBatch {
                    line: i + 1,
                    reason: e.to_string(),
                }
            })?;
            let metric = registry
                .lookup(&parsed.metric)
                .ok_or(StatsError::UnknownMetric(parsed.metric))?;
            entries.push((parsed.t, metric, parsed.value));
        }
        entries.sort_by_key(|&(t, m, _)| (t, m));
        Ok(ReplayProvider { entries, next: 0 })
    }
}

impl StatisticsProvider for ReplayProvider {
    fn name(&self) -> &str {
        "replay"
    }

    fn poll(&mut self, t: u64) -> Result<Vec<(MetricId, f64)>, ProviderError> {
        let mut out = Vec::new();
        while self.next < self.entries.len() && self.entries[self.next].0 <= t {
            let (_, metric, value) = self.entries[self.next];
            out.push((metric, value));
            self.next += 1;
        }
        Ok(out)
    }
}

/// Writes a sample batch in the replay file format.
pub fn write_sample_batch(
    path: impl AsRef<Path>,
    registry: &MetricRegistry,
    samples: &[Sample],
) -> Result<(), StatsError> {
    let mut out = String::new();
    for s in samples {
        let name = registry
            .get(s.metric)
            .ok_or_else(|| StatsError::UnknownMetric(format!("id {}", s.metric)))?
            .name
            .clone();
        out.push_str(&serde_json::to_string(&serde_json::json!({
            "t": s.t,
            "metric": name,
            "value": s.value,
        })).expect("sample serializes"));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::super::MetricSemantics;
    use super::*;

    struct Faulty;
    impl StatisticsProvider for Faulty {
        fn name(&self) -> &str {
            "faulty"
        }
        fn poll(&mut self, _t: u64) -> Result<Vec<(MetricId, f64)>, ProviderError> {
            Err(ProviderError("boom".into()))
        }
    }

    fn registry() -> (MetricRegistry, Vec<MetricId>) {
        let mut r = MetricRegistry::new();
        let ids = vec![
            r.register("node/cpu/busy", MetricSemantics::Gauge, "fraction").unwrap(),
            r.register("node/io/bytes", MetricSemantics::CounterDelta, "bytes").unwrap(),
            r.register("node/net/bytes", MetricSemantics::CounterDelta, "bytes").unwrap(),
            r.register("node/mem/used", MetricSemantics::Gauge, "bytes").unwrap(),
        ];
        (r, ids)
    }

    #[test]
    fn collect_polls_every_provider() {
        let (r, ids) = registry();
        let mut c = Collector::<f64>::new(r);
        for &id in &ids {
            c.add_provider(Box::new(ConstantProvider { metric: id, value: 1.0 }));
        }
        let batch = c.collect(100).unwrap();
        assert_eq!(batch.len(), 4);
    }

    #[test]
    fn empty_collector_yields_empty_batch() {
        let (r, _) = registry();
        let mut c = Collector::<f64>::new(r);
        assert!(c.collect(0).unwrap().is_empty());
    }

    #[test]
    fn failing_provider_is_isolated() {
        let (r, ids) = registry();
        let mut c = Collector::<f64>::new(r);
        c.add_provider(Box::new(ConstantProvider { metric: ids[0], value: 1.0 }));
        c.add_provider(Box::new(Faulty));
        c.add_provider(Box::new(ConstantProvider { metric: ids[1], value: 2.0 }));
        c.add_provider(Box::new(ConstantProvider { metric: ids[2], value: 3.0 }));
        let batch = c.collect(100).unwrap();
        assert_eq!(batch.len(), 3);
        assert_eq!(c.provider_errors(), &[0, 1, 0, 0]);
    }

    #[test]
    fn replay_round_trips_batches() {
        let (r, ids) = registry();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("batch.jsonl");
        let samples: Vec<Sample> = (0..20)
            .map(|i| Sample { t: i * 100, metric: ids[(i % 2) as usize], value: i as f64 })
            .collect();
        write_sample_batch(&path, &r, &samples).unwrap();

        let mut c = Collector::<f64>::new(r);
        let replay = {
            ReplayProvider::from_path(&path, c.registry()).unwrap()
        };
        c.add_provider(Box::new(replay));
        let first = c.collect(500).unwrap();
        assert_eq!(first.len(), 6);
        let rest = c.collect(5_000).unwrap();
        assert_eq!(rest.len(), 14);
    }
}
