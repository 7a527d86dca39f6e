//! Ring buffer of recent activities, flushed downstream on anomaly signals.
//!
//! Attached as a synchronous listener, the forwarder keeps the most recent
//! published activities. When a reasoner raises a signal, the buffered
//! window is sent to the sink oldest-first and the buffer empties, so a
//! repeated signal without new traffic forwards nothing.

use std::collections::VecDeque;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::{Arc, Mutex};

use crate::analysis::AnomalySignal;
use crate::model::Activity;
use crate::report::Report;

use super::{ActivityPlugin, PipelineError};

/// Downstream receiver of flushed activity batches.
pub trait ActivitySink: Send {
    fn receive(&mut self, signal: &AnomalySignal, batch: &[Arc<Activity>]);
}

/// Collects flushed batches in memory; handy for tests and inspection.
#[derive(Debug, Clone, Default)]
pub struct MemorySink {
    batches: Arc<Mutex<Vec<Vec<Arc<Activity>>>>>,
}

impl MemorySink {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn batches(&self) -> Vec<Vec<Arc<Activity>>> {
        self.batches.lock().unwrap().clone()
    }
}

impl ActivitySink for MemorySink {
    fn receive(&mut self, _signal: &AnomalySignal, batch: &[Arc<Activity>]) {
        self.batches.lock().unwrap().push(batch.to_vec());
    }
}

/// Writes each flushed batch as JSON lines: one signal header line, then one
/// line per activity.
pub struct FileSink {
    writer: BufWriter<File>,
}

impl FileSink {
    pub fn create(path: &Path) -> Result<Self, PipelineError> {
        Ok(FileSink {
            writer: BufWriter::new(File::create(path)?),
        })
    }
}

impl ActivitySink for FileSink {
    fn receive(&mut self, signal: &AnomalySignal, batch: &[Arc<Activity>]) {
        let write = |w: &mut BufWriter<File>| -> std::io::Result<()> {
            serde_json::to_writer(&mut *w, signal)?;
            w.write_all(b"\n")?;
            for a in batch {
                serde_json::to_writer(&mut *w, a.as_ref())?;
                w.write_all(b"\n")?;
            }
            w.flush()
        };
        // a full disk must not take the pipeline down; the flush is best-effort
        let _ = write(&mut self.writer);
    }
}

/// Keeps the most recent activities and flushes them on anomaly signals.
pub struct RingBufferForwarder {
    capacity: usize,
    buffer: VecDeque<Arc<Activity>>,
    sink: Box<dyn ActivitySink>,
    flushed_batches: u64,
    flushed_activities: u64,
}

impl RingBufferForwarder {
    pub fn new(capacity: usize, sink: Box<dyn ActivitySink>) -> Self {
        RingBufferForwarder {
            capacity: capacity.max(1),
            buffer: VecDeque::new(),
            sink,
            flushed_batches: 0,
            flushed_activities: 0,
        }
    }

    pub fn buffered(&self) -> usize {
        self.buffer.len()
    }

    /// Flushes the buffered window oldest-first to the sink and empties it.
    pub fn forward_on_anomaly(&mut self, signal: &AnomalySignal) -> Vec<Arc<Activity>> {
        let batch: Vec<Arc<Activity>> = self.buffer.drain(..).collect();
        if !batch.is_empty() {
            self.sink.receive(signal, &batch);
            self.flushed_batches += 1;
            self.flushed_activities += batch.len() as u64;
        }
        batch
    }
}

impl ActivityPlugin for RingBufferForwarder {
    fn name(&self) -> &str {
        "RingForwarder"
    }

    fn on_activity(&mut self, activity: &Activity) {
        if self.buffer.len() == self.capacity {
            self.buffer.pop_front();
        }
        self.buffer.push_back(Arc::new(activity.clone()));
    }

    fn on_signal(&mut self, signal: &AnomalySignal) {
        self.forward_on_anomaly(signal);
    }

    fn report(&self, instance: u32) -> Option<Report> {
        let mut rep = Report::new("RingForwarder", instance, "");
        rep.put_num("Forwarding", "Flushed batches", self.flushed_batches as f64);
        rep.put_num(
            "Forwarding",
            "Flushed activities",
            self.flushed_activities as f64,
        );
        rep.put_num("Forwarding", "Buffered", self.buffer.len() as f64);
        Some(rep)
    }
}
