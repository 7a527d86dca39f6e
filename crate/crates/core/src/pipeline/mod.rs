//! Activity multiplexing and plugin infrastructure.
//!
//! Published activities reach synchronous listeners immediately and
//! losslessly, in registration order; asynchronous listeners are fed from a
//! bounded queue that drops the newest activity when full, with exact drop
//! accounting. Listener panics are contained and counted. Cycles poll the
//! anomaly detectors, hand their aggregates to reasoners and broadcast any
//! resulting signals.

mod config;
mod plugins;
mod ring;

pub use config::{
    load_pipeline, parse_options, ComponentConfig, Dispatch, FactoryContext, GlobalOptions,
    PipelineConfig, PluginFactory, PluginRegistry, PluginSpec,
};
pub use plugins::{FileSurveyorPlugin, HistogramAdpiPlugin, ReasonerPlugin};
pub use ring::{ActivitySink, FileSink, MemorySink, RingBufferForwarder};

use std::collections::VecDeque;
use std::panic::{self, AssertUnwindSafe};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, PoisonError};
use std::time::Instant;

use thiserror::Error;

use crate::analysis::{AdpiAggregate, AnalysisError, AnomalySignal};
use crate::model::Activity;
use crate::report::Report;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("unknown plugin {0:?}")]
    UnknownPlugin(String),
    #[error("bad option for plugin {plugin:?}: {reason}")]
    BadOption { plugin: String, reason: String },
    #[error("bad pipeline config: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("parse: {0}")]
    Parse(#[from] serde_json::Error),
}

/// A pipeline plugin. Activities arrive via [`on_activity`]; detectors hand
/// per-cycle aggregates over in [`cycle_aggregate`]; reasoners turn them into
/// signals in [`on_cycle`]; forwarders react to signals in [`on_signal`].
///
/// [`on_activity`]: ActivityPlugin::on_activity
/// [`cycle_aggregate`]: ActivityPlugin::cycle_aggregate
/// [`on_cycle`]: ActivityPlugin::on_cycle
/// [`on_signal`]: ActivityPlugin::on_signal
pub trait ActivityPlugin: Send {
    fn name(&self) -> &str;

    fn on_activity(&mut self, activity: &Activity);

    /// Detector plugins return and reset their per-cycle category counts.
    fn cycle_aggregate(&mut self) -> Option<AdpiAggregate> {
        None
    }

    /// Called once per polling cycle with every aggregate collected this
    /// cycle; reasoners return the signals they raise.
    fn on_cycle(&mut self, _cycle_t_ns: u64, _aggregates: &[AdpiAggregate]) -> Vec<AnomalySignal> {
        Vec::new()
    }

    fn on_signal(&mut self, _signal: &AnomalySignal) {}

    fn report(&self, _instance: u32) -> Option<Report> {
        None
    }
}

struct Listener {
    plugin: Mutex<Box<dyn ActivityPlugin>>,
    name: String,
    invocations: AtomicU64,
    cumulative_ns: AtomicU64,
    panics: AtomicU64,
}

impl Listener {
    fn new(plugin: Box<dyn ActivityPlugin>) -> Self {
        Listener {
            name: plugin.name().to_string(),
            plugin: Mutex::new(plugin),
            invocations: AtomicU64::new(0),
            cumulative_ns: AtomicU64::new(0),
            panics: AtomicU64::new(0),
        }
    }

    /// Runs `f` on the plugin with timing and panic containment; a panicking
    /// plugin never takes the pipeline down.
    fn invoke<R>(&self, f: impl FnOnce(&mut dyn ActivityPlugin) -> R) -> Option<R> {
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(|| {
            let mut guard = self.plugin.lock().unwrap_or_else(PoisonError::into_inner);
            f(guard.as_mut())
        }));
        self.invocations.fetch_add(1, Ordering::Relaxed);
        self.cumulative_ns
            .fetch_add(start.elapsed().as_nanos() as u64, Ordering::Relaxed);
        match result {
            Ok(r) => Some(r),
            Err(_) => {
                self.panics.fetch_add(1, Ordering::Relaxed);
                None
            }
        }
    }
}

/// Operational counters of one listener.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ListenerStats {
    pub name: String,
    pub asynchronous: bool,
    pub invocations: u64,
    pub cumulative_ns: u64,
    pub panics: u64,
}

/// Pipeline-wide counters; `published == delivered + dropped + queued` holds
/// at every quiescent point, in units of activities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PipelineReport {
    pub published: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub queued: u64,
    pub listeners: Vec<ListenerStats>,
}

/// The activity multiplexer: fans published activities out to listeners.
pub struct Pipeline {
    sync: Vec<Listener>,
    asynchronous: Vec<Listener>,
    queue: Mutex<VecDeque<Arc<Activity>>>,
    capacity: usize,
    published: AtomicU64,
    delivered: AtomicU64,
    dropped: AtomicU64,
    drain_lock: Mutex<()>,
    cycle_activities: u64,
}

impl Pipeline {
    pub fn new(async_capacity: usize) -> Self {
        Pipeline {
            sync: Vec::new(),
            asynchronous: Vec::new(),
            queue: Mutex::new(VecDeque::new()),
            capacity: async_capacity.max(1),
            published: AtomicU64::new(0),
            delivered: AtomicU64::new(0),
            dropped: AtomicU64::new(0),
            drain_lock: Mutex::new(()),
            cycle_activities: 1000,
        }
    }

    /// How many activities between polling cycles a driver should use.
    pub fn cycle_activities(&self) -> u64 {
        self.cycle_activities
    }

    pub fn set_cycle_activities(&mut self, n: u64) {
        self.cycle_activities = n.max(1);
    }

    pub fn add_sync(&mut self, plugin: Box<dyn ActivityPlugin>) {
        self.sync.push(Listener::new(plugin));
    }

    pub fn add_async(&mut self, plugin: Box<dyn ActivityPlugin>) {
        self.asynchronous.push(Listener::new(plugin));
    }

    pub fn listener_count(&self) -> (usize, usize) {
        (self.sync.len(), self.asynchronous.len())
    }

    /// Publishes one activity: every sync listener runs before return; the
    /// activity is queued for async delivery or dropped when the queue is
    /// full. Without async listeners delivery completes here, so the
    /// counter conservation law holds for sync-only pipelines too.
    pub fn publish(&self, activity: Activity) {
        let activity = Arc::new(activity);
        self.published.fetch_add(1, Ordering::SeqCst);
        for listener in &self.sync {
            listener.invoke(|p| p.on_activity(&activity));
        }
        if self.asynchronous.is_empty() {
            self.delivered.fetch_add(1, Ordering::SeqCst);
            return;
        }
        let mut queue = self.queue.lock().unwrap();
        if queue.len() < self.capacity {
            queue.push_back(activity);
        } else {
            self.dropped.fetch_add(1, Ordering::SeqCst);
        }
    }

    /// Delivers queued activities to the async listeners in order, returning
    /// how many activities were delivered. Only one drain runs at a time.
    pub fn drain_async(&self) -> u64 {
        let _drainer = self.drain_lock.lock().unwrap_or_else(PoisonError::into_inner);
        let mut count = 0;
        loop {
            let next = self.queue.lock().unwrap().pop_front();
            let Some(activity) = next else {
                break;
            };
            for listener in &self.asynchronous {
                listener.invoke(|p| p.on_activity(&activity));
            }
            self.delivered.fetch_add(1, Ordering::SeqCst);
            count += 1;
        }
        count
    }

    /// Runs one polling cycle: collects detector aggregates, lets reasoners
    /// turn them into signals and broadcasts those to every listener.
    pub fn run_cycle(&self, cycle_t_ns: u64) -> Vec<AnomalySignal> {
        let all = || self.sync.iter().chain(&self.asynchronous);
        let aggregates: Vec<AdpiAggregate> = all()
            .filter_map(|l| l.invoke(|p| p.cycle_aggregate()).flatten())
            .collect();
        let mut signals = Vec::new();
        for listener in all() {
            if let Some(mut s) = listener.invoke(|p| p.on_cycle(cycle_t_ns, &aggregates)) {
                signals.append(&mut s);
            }
        }
        for signal in &signals {
            for listener in all() {
                listener.invoke(|p| p.on_signal(signal));
            }
        }
        signals
    }

    /// Counter snapshot; conservation holds when no publish or drain is in
    /// flight.
    pub fn report(&self) -> PipelineReport {
        let queued = if self.asynchronous.is_empty() {
            0
        } else {
            self.queue.lock().unwrap().len() as u64
        };
        let stats = |l: &Listener, asynchronous: bool| ListenerStats {
            name: l.name.clone(),
            asynchronous,
            invocations: l.invocations.load(Ordering::SeqCst),
            cumulative_ns: l.cumulative_ns.load(Ordering::SeqCst),
            panics: l.panics.load(Ordering::SeqCst),
        };
        PipelineReport {
            published: self.published.load(Ordering::SeqCst),
            delivered: self.delivered.load(Ordering::SeqCst),
            dropped: self.dropped.load(Ordering::SeqCst),
            queued,
            listeners: self
                .sync
                .iter()
                .map(|l| stats(l, false))
                .chain(self.asynchronous.iter().map(|l| stats(l, true)))
                .collect(),
        }
    }

    /// Collects the per-plugin reports, instance-numbered by listener index.
    pub fn plugin_reports(&self) -> Vec<Report> {
        self.sync
            .iter()
            .chain(&self.asynchronous)
            .enumerate()
            .filter_map(|(i, l)| l.invoke(|p| p.report(i as u32)).flatten())
            .collect()
    }
}

/// Conservation note: publishing when the queue is full drops the NEWEST
/// activity, keeping the buffered prefix causally intact.
#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ActivityId;
    use std::sync::atomic::AtomicUsize;

    fn activity(pid: u32, seq: u64) -> Activity {
        Activity {
            aid: ActivityId::new(pid, seq),
            component: crate::model::ComponentId(0),
            ucaid: crate::model::Ucaid(0),
            t_start: seq * 10,
            t_stop: seq * 10 + 5,
            attributes: Vec::new(),
            parents: Vec::new(),
            error: 0,
        }
    }

    /// Records every activity id it sees, in order.
    struct Recorder {
        seen: Arc<Mutex<Vec<ActivityId>>>,
    }

    impl ActivityPlugin for Recorder {
        fn name(&self) -> &str {
            "Recorder"
        }
        fn on_activity(&mut self, a: &Activity) {
            self.seen.lock().unwrap().push(a.aid);
        }
    }

    struct Panicker {
        after: usize,
        count: usize,
    }

    impl ActivityPlugin for Panicker {
        fn name(&self) -> &str {
            "Panicker"
        }
        fn on_activity(&mut self, _a: &Activity) {
            self.count += 1;
            if self.count > self.after {
                panic!("plugin failure");
            }
        }
    }

    fn recorder() -> (Box<Recorder>, Arc<Mutex<Vec<ActivityId>>>) {
        let seen = Arc::new(Mutex::new(Vec::new()));
        (
            Box::new(Recorder { seen: seen.clone() }),
            seen,
        )
    }

    #[test]
    fn sync_listeners_observe_everything_in_order() {
        let mut p = Pipeline::new(16);
        let (r1, seen1) = recorder();
        let (r2, seen2) = recorder();
        p.add_sync(r1);
        p.add_sync(r2);
        for i in 1..=5 {
            p.publish(activity(1, i));
        }
        let expect: Vec<ActivityId> = (1..=5).map(|i| ActivityId::new(1, i)).collect();
        assert_eq!(*seen1.lock().unwrap(), expect);
        assert_eq!(*seen2.lock().unwrap(), expect);
    }

    #[test]
    fn overload_drops_the_newest_and_counts_it() {
        let mut p = Pipeline::new(2);
        let (r, seen) = recorder();
        p.add_async(r);
        for i in 1..=5 {
            p.publish(activity(1, i));
        }
        let rep = p.report();
        assert_eq!(rep.published, 5);
        assert_eq!(rep.dropped, 3);
        assert_eq!(rep.queued, 2);
        assert_eq!(rep.delivered, 0);
        let delivered = p.drain_async();
        assert_eq!(delivered, 2);
        // the oldest two survive: drop-newest keeps the prefix
        assert_eq!(
            *seen.lock().unwrap(),
            vec![ActivityId::new(1, 1), ActivityId::new(1, 2)]
        );
        let rep = p.report();
        assert_eq!(rep.published, rep.delivered + rep.dropped + rep.queued);
    }

    #[test]
    fn drain_delivers_in_order_and_returns_the_count() {
        let mut p = Pipeline::new(16);
        let (r, seen) = recorder();
        p.add_async(r);
        for i in 1..=4 {
            p.publish(activity(2, i));
        }
        assert_eq!(p.drain_async(), 4);
        assert_eq!(p.drain_async(), 0, "drain on empty queue");
        let expect: Vec<ActivityId> = (1..=4).map(|i| ActivityId::new(2, i)).collect();
        assert_eq!(*seen.lock().unwrap(), expect);
    }

    #[test]
    fn no_listeners_is_a_cheap_no_op() {
        let p = Pipeline::new(4);
        p.publish(activity(1, 1));
        let rep = p.report();
        assert_eq!(rep.published, 1);
        assert_eq!(rep.dropped, 0);
        assert_eq!(rep.queued, 0);
    }

    #[test]
    fn fresh_pipeline_reports_zeros() {
        let p = Pipeline::new(4);
        let rep = p.report();
        assert_eq!((rep.published, rep.delivered, rep.dropped, rep.queued), (0, 0, 0, 0));
        assert!(rep.listeners.is_empty());
    }

    #[test]
    fn async_invocations_scale_with_listener_count() {
        let mut p = Pipeline::new(16);
        let (r1, _s1) = recorder();
        let (r2, _s2) = recorder();
        let (r3, _s3) = recorder();
        p.add_async(r1);
        p.add_async(r2);
        p.add_async(r3);
        for i in 1..=5 {
            p.publish(activity(1, i));
        }
        p.drain_async();
        let rep = p.report();
        assert_eq!(rep.delivered, 5, "delivered counts activities");
        let async_invocations: u64 = rep
            .listeners
            .iter()
            .filter(|l| l.asynchronous)
            .map(|l| l.invocations)
            .sum();
        assert_eq!(async_invocations, 5 * 3, "and fan-out shows per listener");
    }

    #[test]
    fn a_panicking_listener_never_blocks_the_others() {
        let mut p = Pipeline::new(16);
        p.add_sync(Box::new(Panicker { after: 1, count: 0 }));
        let (r, seen) = recorder();
        p.add_sync(r);
        for i in 1..=3 {
            p.publish(activity(1, i));
        }
        assert_eq!(seen.lock().unwrap().len(), 3);
        let rep = p.report();
        assert_eq!(rep.listeners[0].panics, 2);
        assert_eq!(rep.listeners[1].panics, 0);
    }

    #[test]
    fn concurrent_producers_conserve_every_activity() {
        let mut p = Pipeline::new(64);
        let (r, _seen) = recorder();
        p.add_async(r);
        let p = Arc::new(p);
        let mut handles = Vec::new();
        for pid in 0..4u32 {
            let p = p.clone();
            handles.push(std::thread::spawn(move || {
                for seq in 1..=500u64 {
                    p.publish(activity(pid, seq));
                }
            }));
        }
        let drainer = {
            let p = p.clone();
            std::thread::spawn(move || {
                let mut total = 0;
                for _ in 0..200 {
                    total += p.drain_async();
                    std::thread::yield_now();
                }
                total
            })
        };
        for h in handles {
            h.join().unwrap();
        }
        drainer.join().unwrap();
        p.drain_async();
        let rep = p.report();
        assert_eq!(rep.published, 2000);
        assert_eq!(rep.published, rep.delivered + rep.dropped + rep.queued);
        assert_eq!(rep.queued, 0);
    }

    struct CountingDetector {
        calls: Arc<AtomicUsize>,
    }

    impl ActivityPlugin for CountingDetector {
        fn name(&self) -> &str {
            "CountingDetector"
        }
        fn on_activity(&mut self, _a: &Activity) {}
        fn cycle_aggregate(&mut self) -> Option<AdpiAggregate> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            Some(AdpiAggregate {
                counts: [0, 0, 4, 0, 6],
            })
        }
    }

    struct SignallingReasoner;

    impl ActivityPlugin for SignallingReasoner {
        fn name(&self) -> &str {
            "SignallingReasoner"
        }
        fn on_activity(&mut self, _a: &Activity) {}
        fn on_cycle(&mut self, t: u64, aggregates: &[AdpiAggregate]) -> Vec<AnomalySignal> {
            let (_, signal) = crate::analysis::reason(
                crate::analysis::ReasonerRole::Process,
                "r0",
                t,
                aggregates,
                &[],
                &crate::analysis::ReasonerOptions::default(),
            );
            signal.into_iter().collect()
        }
    }

    struct SignalRecorder {
        seen: Arc<Mutex<Vec<AnomalySignal>>>,
    }

    impl ActivityPlugin for SignalRecorder {
        fn name(&self) -> &str {
            "SignalRecorder"
        }
        fn on_activity(&mut self, _a: &Activity) {}
        fn on_signal(&mut self, s: &AnomalySignal) {
            self.seen.lock().unwrap().push(s.clone());
        }
    }

    #[test]
    fn cycles_poll_detectors_and_broadcast_signals() {
        let mut p = Pipeline::new(4);
        let calls = Arc::new(AtomicUsize::new(0));
        let seen = Arc::new(Mutex::new(Vec::new()));
        p.add_sync(Box::new(CountingDetector { calls: calls.clone() }));
        p.add_sync(Box::new(SignallingReasoner));
        p.add_sync(Box::new(SignalRecorder { seen: seen.clone() }));
        let signals = p.run_cycle(12345);
        assert_eq!(calls.load(Ordering::SeqCst), 1);
        assert_eq!(signals.len(), 1, "6 of 10 very slow must signal");
        assert_eq!(signals[0].severity, 0.6);
        assert_eq!(signals[0].cycle_t_ns, 12345);
        assert_eq!(*seen.lock().unwrap(), signals);
    }
}
