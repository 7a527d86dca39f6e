//! Per-file access survey with bounded memory.
//!
//! Tracks open file handles per process, classifies every data access by
//! seek distance and accumulates counts, bytes and phase times per file.
//! Distinct files beyond the configured bound share one overflow row, so
//! memory stays bounded no matter how many files a job touches.

use std::collections::HashMap;

use indexmap::IndexMap;

use crate::model::{Activity, AttributeId, ComponentId, Registries, Ucaid};
use crate::report::Report;

use super::{classify_access, AnalysisError, Direction, DEFAULT_SHORT_SEEK_THRESHOLD};

/// Row name all files beyond the bound are merged into.
pub const OVERFLOW_FILE: &str = "ALL_OTHERS";

/// Default cap on individually tracked files.
pub const DEFAULT_MAX_FILES: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum OpRole {
    Open,
    Read,
    Write,
    Seek,
    Close,
}

/// Survey configuration: which layer to watch, which ops play which role and
/// which attributes carry the access details.
///
/// Attribute names are `(domain, name)` pairs resolved against the ontology;
/// missing ones simply disable the detail they would provide.
#[derive(Debug, Clone)]
pub struct SurveyOptions {
    pub layer: String,
    pub short_seek_threshold: u64,
    pub max_files: usize,
    pub open_ops: Vec<String>,
    pub read_ops: Vec<String>,
    pub write_ops: Vec<String>,
    pub seek_ops: Vec<String>,
    pub close_ops: Vec<String>,
    pub filename_attr: (String, String),
    pub filehandle_attr: (String, String),
    pub position_attr: (String, String),
    pub bytes_read_attr: (String, String),
    pub bytes_written_attr: (String, String),
}

impl SurveyOptions {
    /// Conventional POSIX-style defaults for the given layer name.
    pub fn posix(layer: &str) -> Self {
        let s = |v: &[&str]| v.iter().map(|s| s.to_string()).collect();
        SurveyOptions {
            layer: layer.to_string(),
            short_seek_threshold: DEFAULT_SHORT_SEEK_THRESHOLD,
            max_files: DEFAULT_MAX_FILES,
            open_ops: s(&["open", "creat"]),
            read_ops: s(&["read", "pread"]),
            write_ops: s(&["write", "pwrite"]),
            seek_ops: s(&["seek", "lseek"]),
            close_ops: s(&["close"]),
            filename_attr: ("POSIX/descriptor".into(), "filename".into()),
            filehandle_attr: ("POSIX/descriptor".into(), "filehandle".into()),
            position_attr: ("POSIX/file".into(), "position".into()),
            bytes_read_attr: ("POSIX/quantity".into(), "BytesRead".into()),
            bytes_written_attr: ("POSIX/quantity".into(), "BytesWritten".into()),
        }
    }
}

#[derive(Debug, Default, Clone)]
struct DirStats {
    class_counts: [u64; 3],
    bytes: u64,
    time_ns: u64,
    seek_distance_sum: u128,
}

impl DirStats {
    fn accesses(&self) -> u64 {
        self.class_counts.iter().sum()
    }
}

#[derive(Debug, Default, Clone)]
struct FileRow {
    read: DirStats,
    write: DirStats,
    open_time_ns: u64,
    close_time_ns: u64,
    seek_time_ns: u64,
}

impl FileRow {
    fn dir(&mut self, d: Direction) -> &mut DirStats {
        match d {
            Direction::Read => &mut self.read,
            Direction::Write => &mut self.write,
        }
    }

    fn surveyed_ns(&self) -> u64 {
        self.open_time_ns
            + self.close_time_ns
            + self.seek_time_ns
            + self.read.time_ns
            + self.write.time_ns
    }
}

#[derive(Debug, Clone, Copy)]
struct HandleState {
    row: usize,
    cursor: u64,
}

/// Bounded per-file access survey for one component layer.
pub struct SurveyTable {
    component: ComponentId,
    layer: String,
    roles: Vec<Option<OpRole>>,
    threshold: u64,
    max_files: usize,
    filename: Option<AttributeId>,
    filehandle: Option<AttributeId>,
    position: Option<AttributeId>,
    bytes_read: Option<AttributeId>,
    bytes_written: Option<AttributeId>,
    handles: HashMap<(u32, u64), HandleState>,
    files: IndexMap<String, FileRow>,
    unknown_handles: u64,
}

impl SurveyTable {
    pub fn new(opts: &SurveyOptions, regs: &Registries) -> Result<Self, AnalysisError> {
        let comp = regs
            .system
            .by_layer(&opts.layer)
            .ok_or_else(|| AnalysisError::UnknownLayer(opts.layer.clone()))?;
        let mut roles = vec![None; comp.ops.len()];
        let mut bind = |names: &[String], role: OpRole| {
            for name in names {
                if let Some(ucaid) = comp.ucaid(name) {
                    roles[ucaid.0 as usize] = Some(role);
                }
            }
        };
        bind(&opts.open_ops, OpRole::Open);
        bind(&opts.read_ops, OpRole::Read);
        bind(&opts.write_ops, OpRole::Write);
        bind(&opts.seek_ops, OpRole::Seek);
        bind(&opts.close_ops, OpRole::Close);
        let attr = |(d, n): &(String, String)| regs.ontology.lookup(d, n);
        Ok(SurveyTable {
            component: comp.id,
            layer: comp.layer.clone(),
            roles,
            threshold: opts.short_seek_threshold,
            max_files: opts.max_files.max(1),
            filename: attr(&opts.filename_attr),
            filehandle: attr(&opts.filehandle_attr),
            position: attr(&opts.position_attr),
            bytes_read: attr(&opts.bytes_read_attr),
            bytes_written: attr(&opts.bytes_written_attr),
            handles: HashMap::new(),
            files: IndexMap::new(),
            unknown_handles: 0,
        })
    }

    fn role(&self, ucaid: Ucaid) -> Option<OpRole> {
        self.roles.get(ucaid.0 as usize).copied().flatten()
    }

    fn attr_u64(&self, a: &Activity, id: Option<AttributeId>) -> Option<u64> {
        a.attr(id?).and_then(|v| v.as_u64())
    }

    /// Index of the row for `name`, respecting the file bound.
    fn row_for(&mut self, name: &str) -> usize {
        if let Some(idx) = self.files.get_index_of(name) {
            return idx;
        }
        if self.files.len() < self.max_files {
            self.files.insert(name.to_string(), FileRow::default());
            self.files.len() - 1
        } else {
            self.files
                .entry(OVERFLOW_FILE.to_string())
                .or_default();
            self.files.get_index_of(OVERFLOW_FILE).unwrap()
        }
    }

    fn lookup_handle(&mut self, a: &Activity) -> Option<HandleState> {
        let fh = self.attr_u64(a, self.filehandle);
        match fh.and_then(|fh| self.handles.get(&(a.aid.pid, fh)).copied()) {
            Some(state) => Some(state),
            None => {
                self.unknown_handles += 1;
                None
            }
        }
    }

    /// Feeds one activity. Activities of other components or unconfigured ops
    /// are ignored; data ops on handles never opened are counted as unknown
    /// and skipped.
    pub fn update(&mut self, a: &Activity) {
        if a.component != self.component {
            return;
        }
        let Some(role) = self.role(a.ucaid) else {
            return;
        };
        let duration = a.duration_ns();
        match role {
            OpRole::Open => {
                let name = self
                    .filename
                    .and_then(|id| a.attr(id))
                    .and_then(|v| v.as_str())
                    .unwrap_or("<unknown>")
                    .to_string();
                let row = self.row_for(&name);
                self.files[row].open_time_ns += duration;
                if let Some(fh) = self.attr_u64(a, self.filehandle) {
                    self.handles
                        .insert((a.aid.pid, fh), HandleState { row, cursor: 0 });
                }
            }
            OpRole::Close => {
                let fh = self.attr_u64(a, self.filehandle);
                match fh.and_then(|fh| self.handles.remove(&(a.aid.pid, fh))) {
                    Some(state) => self.files[state.row].close_time_ns += duration,
                    None => self.unknown_handles += 1,
                }
            }
            OpRole::Seek => {
                let Some(state) = self.lookup_handle(a) else {
                    return;
                };
                self.files[state.row].seek_time_ns += duration;
                if let Some(pos) = self.attr_u64(a, self.position) {
                    let fh = self.attr_u64(a, self.filehandle).unwrap();
                    self.handles.get_mut(&(a.aid.pid, fh)).unwrap().cursor = pos;
                }
            }
            OpRole::Read | OpRole::Write => {
                let Some(state) = self.lookup_handle(a) else {
                    return;
                };
                let dir = if role == OpRole::Read {
                    Direction::Read
                } else {
                    Direction::Write
                };
                let bytes_attr = match dir {
                    Direction::Read => self.bytes_read,
                    Direction::Write => self.bytes_written,
                };
                let bytes = self.attr_u64(a, bytes_attr).unwrap_or(0);
                let offset = self
                    .attr_u64(a, self.position)
                    .unwrap_or(state.cursor);
                let class = classify_access(state.cursor, offset, self.threshold);
                let stats = self.files[state.row].dir(dir);
                stats.class_counts[class.index()] += 1;
                stats.bytes += bytes;
                stats.time_ns += duration;
                stats.seek_distance_sum += u128::from(offset.abs_diff(state.cursor));
                let fh = self.attr_u64(a, self.filehandle).unwrap();
                self.handles.get_mut(&(a.aid.pid, fh)).unwrap().cursor = offset + bytes;
            }
        }
    }

    pub fn layer(&self) -> &str {
        &self.layer
    }

    /// Number of distinct rows, including the overflow row if present.
    pub fn file_count(&self) -> usize {
        self.files.len()
    }

    pub fn file_names(&self) -> impl Iterator<Item = &str> {
        self.files.keys().map(String::as_str)
    }

    /// Per-class access counts for one file row, `[sequential, short, long]`.
    pub fn class_counts(&self, file: &str, dir: Direction) -> Option<[u64; 3]> {
        let row = self.files.get(file)?;
        Some(match dir {
            Direction::Read => row.read.class_counts,
            Direction::Write => row.write.class_counts,
        })
    }

    pub fn bytes(&self, file: &str, dir: Direction) -> Option<u64> {
        let row = self.files.get(file)?;
        Some(match dir {
            Direction::Read => row.read.bytes,
            Direction::Write => row.write.bytes,
        })
    }

    /// Data ops that arrived on a handle with no preceding open.
    pub fn unknown_handle_count(&self) -> u64 {
        self.unknown_handles
    }

    /// Renders the survey as a report, one quoted group per file.
    /// Times are seconds, bytes and counts are plain numbers.
    pub fn report(&self, instance: u32) -> Report {
        let mut rep = Report::new("FileSurveyor", instance, &self.layer);
        let secs = |ns: u64| ns as f64 / 1e9;
        for (name, row) in &self.files {
            let g = Report::quoted_group(name);
            rep.put_num(&g, "Accesses", (row.read.accesses() + row.write.accesses()) as f64);
            for (label, stats) in [("Reading", &row.read), ("Writing", &row.write)] {
                let [seq, short, long] = stats.class_counts;
                rep.put_num(&g, &format!("Accesses/{label}/Sequential"), seq as f64);
                rep.put_num(
                    &g,
                    &format!("Accesses/{label}/Random, short seek"),
                    short as f64,
                );
                rep.put_num(
                    &g,
                    &format!("Accesses/{label}/Random, long seek"),
                    long as f64,
                );
            }
            rep.put_num(&g, "Bytes/Total read", row.read.bytes as f64);
            rep.put_num(&g, "Bytes/Total written", row.write.bytes as f64);
            let per_access = |s: &DirStats| {
                if s.accesses() == 0 {
                    0.0
                } else {
                    s.bytes as f64 / s.accesses() as f64
                }
            };
            rep.put_num(&g, "Bytes/Read per access", per_access(&row.read));
            rep.put_num(&g, "Bytes/Written per access", per_access(&row.write));
            let avg_seek = |s: &DirStats| {
                if s.accesses() == 0 {
                    0.0
                } else {
                    s.seek_distance_sum as f64 / s.accesses() as f64
                }
            };
            rep.put_num(&g, "Seek Distance/Average reading", avg_seek(&row.read));
            rep.put_num(&g, "Seek Distance/Average writing", avg_seek(&row.write));
            rep.put_num(&g, "Time/Total for opening", secs(row.open_time_ns));
            rep.put_num(&g, "Time/Total for reading", secs(row.read.time_ns));
            rep.put_num(&g, "Time/Total for writing", secs(row.write.time_ns));
            rep.put_num(&g, "Time/Total for closing", secs(row.close_time_ns));
            rep.put_num(&g, "Time/Total surveyed", secs(row.surveyed_ns()));
        }
        rep
    }
}
