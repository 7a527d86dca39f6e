//! Per-process access streams reconstructed from a unified trace.
//!
//! Walks one layer's activities in trace order and follows each file handle:
//! an open starts it at position zero, seeks move it, data operations emit
//! one point each and advance it, a close retires it. The result is the
//! spatial/temporal access pattern that plotting and phase detection consume.

use std::collections::HashMap;

use iotrace_core::analysis::{Direction, SurveyOptions};
use iotrace_core::model::{Activity, AttrValue, AttributeId, Registries};

/// One data access: when, where, how much, which way.
#[derive(Debug, Clone, PartialEq)]
pub struct AccessPoint {
    pub t_ns: u64,
    pub offset: u64,
    pub len: u64,
    pub direction: Direction,
    pub file: String,
}

/// A process's accesses in trace order.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessSeries {
    pub pid: u32,
    pub points: Vec<AccessPoint>,
}

#[derive(Clone, Copy, PartialEq)]
enum Role {
    Open,
    Read,
    Write,
    Seek,
    Close,
}

/// Extracts per-process access series for the layer named in `opts`.
/// Unknown layers and traces without data activities yield an empty list.
pub fn access_series(
    regs: &Registries,
    activities: &[Activity],
    opts: &SurveyOptions,
) -> Vec<ProcessSeries> {
    let Some(comp) = regs.system.by_layer(&opts.layer) else {
        return Vec::new();
    };
    let roles: Vec<Option<Role>> = comp
        .ops
        .iter()
        .map(|op| {
            let is = |names: &[String]| names.iter().any(|n| n == op);
            if is(&opts.open_ops) {
                Some(Role::Open)
            } else if is(&opts.read_ops) {
                Some(Role::Read)
            } else if is(&opts.write_ops) {
                Some(Role::Write)
            } else if is(&opts.seek_ops) {
                Some(Role::Seek)
            } else if is(&opts.close_ops) {
                Some(Role::Close)
            } else {
                None
            }
        })
        .collect();
    let lookup = |(domain, name): &(String, String)| regs.ontology.lookup(domain, name);
    let filename = lookup(&opts.filename_attr);
    let filehandle = lookup(&opts.filehandle_attr);
    let position = lookup(&opts.position_attr);
    let bytes_read = lookup(&opts.bytes_read_attr);
    let bytes_written = lookup(&opts.bytes_written_attr);

    let get_u64 = |a: &Activity, id: Option<AttributeId>| {
        id.and_then(|id| a.attr(id)).and_then(AttrValue::as_u64)
    };
    let get_str = |a: &Activity, id: Option<AttributeId>| {
        id.and_then(|id| a.attr(id))
            .and_then(AttrValue::as_str)
            .map(str::to_string)
    };

    // (pid, handle) -> (next position, file name)
    let mut open_files: HashMap<(u32, u64), (u64, String)> = HashMap::new();
    let mut series: Vec<ProcessSeries> = Vec::new();
    let mut by_pid: HashMap<u32, usize> = HashMap::new();

    for a in activities {
        if a.component != comp.id {
            continue;
        }
        let Some(role) = roles.get(a.ucaid.0 as usize).copied().flatten() else {
            continue;
        };
        let handle = get_u64(a, filehandle);
        match role {
            Role::Open => {
                if let Some(h) = handle {
                    let name = get_str(a, filename).unwrap_or_else(|| format!("fd{h}"));
                    open_files.insert((a.aid.pid, h), (0, name));
                }
            }
            Role::Seek => {
                if let (Some(h), Some(pos)) = (handle, get_u64(a, position)) {
                    if let Some(state) = open_files.get_mut(&(a.aid.pid, h)) {
                        state.0 = pos;
                    }
                }
            }
            Role::Close => {
                if let Some(h) = handle {
                    open_files.remove(&(a.aid.pid, h));
                }
            }
            Role::Read | Role::Write => {
                let direction = if role == Role::Read {
                    Direction::Read
                } else {
                    Direction::Write
                };
                let len = get_u64(
                    a,
                    if direction == Direction::Read {
                        bytes_read
                    } else {
                        bytes_written
                    },
                )
                .unwrap_or(0);
                // A handle first seen here is followed from position zero.
                let state = match handle {
                    Some(h) => open_files
                        .entry((a.aid.pid, h))
                        .or_insert_with(|| (0, format!("fd{h}"))),
                    None => open_files
                        .entry((a.aid.pid, u64::MAX))
                        .or_insert_with(|| (0, "?".to_string())),
                };
                let offset = get_u64(a, position).unwrap_or(state.0);
                state.0 = offset + len;
                let point = AccessPoint {
                    t_ns: a.t_start,
                    offset,
                    len,
                    direction,
                    file: state.1.clone(),
                };
                let idx = *by_pid.entry(a.aid.pid).or_insert_with(|| {
                    series.push(ProcessSeries {
                        pid: a.aid.pid,
                        points: Vec::new(),
                    });
                    series.len() - 1
                });
                series[idx].points.push(point);
            }
        }
    }
    series.sort_by_key(|s| s.pid);
    series
}
