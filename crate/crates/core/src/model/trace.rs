//! Line-oriented trace file format.
//!
//! A trace is UTF-8 text: one JSON header object on the first line carrying
//! the registries, then one JSON record per activity. The body is sorted by
//! `(t_start, aid)`. Reading validates structure, id resolution, ordering and
//! parent sanity; the first malformed record is reported with its byte offset.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    Activity, ActivityId, AssociationMap, AttrValue, AttributeDef, AttributeId,
    ComponentDescriptor, ComponentId, Datatype, Registries, Ucaid,
};

pub const TRACE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("format error at byte {offset}: {reason}")]
    Format { offset: u64, reason: String },
}

fn format_err(offset: u64, reason: impl Into<String>) -> TraceError {
    TraceError::Format {
        offset,
        reason: reason.into(),
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    version: u32,
    epoch_ns: u64,
    attributes: Vec<AttributeDef>,
    components: Vec<ComponentDescriptor>,
    associations: AssociationMap,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    aid: (u32, u64),
    comp: u32,
    ucaid: u32,
    t0: u64,
    t1: u64,
    attrs: Vec<(u32, serde_json::Value)>,
    parents: Vec<(u32, u64)>,
    err: i64,
}

/// Writes activities and their registries to `path`.
///
/// The body is emitted sorted by `(t_start, aid)` regardless of input order,
/// so writing is deterministic for a given activity set.
pub fn write_trace(
    path: impl AsRef<Path>,
    activities: &[Activity],
    regs: &Registries,
) -> Result<(), TraceError> {
    let mut order: Vec<&Activity> = activities.iter().collect();
    order.sort_by_key(|a| (a.t_start, a.aid));

    let mut seen = HashSet::with_capacity(order.len());
    for a in &order {
        if !seen.insert(a.aid) {
            return Err(format_err(0, format!("duplicate activity id {}", a.aid)));
        }
        for (_, v) in &a.attributes {
            if let AttrValue::Float64(f) = v {
                if !f.is_finite() {
                    return Err(format_err(
                        0,
                        format!("activity {} has a non-finite attribute", a.aid),
                    ));
                }
            }
        }
    }

    let header = Header {
        version: TRACE_VERSION,
        epoch_ns: regs.epoch_ns,
        attributes: regs.ontology.defs().to_vec(),
        components: regs.system.components().to_vec(),
        associations: regs.associations.clone(),
    };

    let file = fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    serde_json::to_writer(&mut w, &header).map_err(|e| format_err(0, e.to_string()))?;
    w.write_all(b"\n")?;
    for a in order {
        serde_json::to_writer(&mut w, a).map_err(|e| format_err(0, e.to_string()))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a trace back into registries and activities.
pub fn read_trace(path: impl AsRef<Path>) -> Result<(Registries, Vec<Activity>), TraceError> {
    let bytes = fs::read(path)?;
    let text = std::str::from_utf8(&bytes)
        .map_err(|e| format_err(e.valid_up_to() as u64, "trace is not valid UTF-8"))?;

    let mut lines = Vec::new();
    let mut offset = 0u64;
    for line in text.split_inclusive('\n') {
        let body = line.strip_suffix('\n').unwrap_or(line);
        lines.push((offset, body));
        offset += line.len() as u64;
    }
    if let Some(&(_, last)) = lines.last() {
        if last.is_empty() {
            lines.pop();
        }
    }
    let Some(&(_, header_line)) = lines.first() else {
        return Err(format_err(0, "empty trace"));
    };

    let header: Header = serde_json::from_str(header_line)
        .map_err(|e| format_err(0, format!("bad header: {e}")))?;
    if header.version != TRACE_VERSION {
        return Err(format_err(
            0,
            format!("unsupported version {}", header.version),
        ));
    }
    let ontology =
        super::Ontology::from_defs(header.attributes).map_err(|e| format_err(0, e))?;
    let system =
        super::SystemInfo::from_components(header.components).map_err(|e| format_err(0, e))?;
    let regs = Registries {
        epoch_ns: header.epoch_ns,
        ontology,
        system,
        associations: header.associations,
    };

    let mut activities = Vec::with_capacity(lines.len().saturating_sub(1));
    let mut prev_key: Option<(u64, ActivityId)> = None;
    let mut starts: HashMap<ActivityId, u64> = HashMap::new();
    for &(off, line) in &lines[1..] {
        let raw: RawRecord = serde_json::from_str(line)
            .map_err(|e| format_err(off, format!("bad record: {e}")))?;
        let a = decode_record(raw, &regs, off)?;
        if starts.insert(a.aid, a.t_start).is_some() {
            return Err(format_err(off, format!("duplicate activity id {}", a.aid)));
        }
        let key = (a.t_start, a.aid);
        if let Some(prev) = prev_key {
            if key < prev {
                return Err(format_err(off, "body not sorted by (t_start, aid)"));
            }
        }
        prev_key = Some(key);
        activities.push((off, a));
    }

    for (off, a) in &activities {
        for p in &a.parents {
            match starts.get(p) {
                None => {
                    return Err(format_err(*off, format!("unknown parent {p}")));
                }
                Some(&pt) if pt > a.t_start => {
                    return Err(format_err(
                        *off,
                        format!("parent {p} starts after its child"),
                    ));
                }
                _ => {}
            }
        }
    }

    Ok((regs, activities.into_iter().map(|(_, a)| a).collect()))
}

fn decode_record(raw: RawRecord, regs: &Registries, off: u64) -> Result<Activity, TraceError> {
    let component = ComponentId(raw.comp);
    let comp = regs
        .system
        .component(component)
        .ok_or_else(|| format_err(off, format!("unknown component {}", raw.comp)))?;
    let ucaid = Ucaid(raw.ucaid);
    if comp.op_name(ucaid).is_none() {
        return Err(format_err(
            off,
            format!("unknown ucaid {} for component {:?}", raw.ucaid, comp.layer),
        ));
    }
    if raw.t1 < raw.t0 {
        return Err(format_err(off, "t1 before t0"));
    }
    let mut attributes = Vec::with_capacity(raw.attrs.len());
    for (id, value) in raw.attrs {
        let id = AttributeId(id);
        let def = regs
            .ontology
            .get(id)
            .ok_or_else(|| format_err(off, format!("unknown attribute {}", id)))?;
        attributes.push((id, decode_value(def, value, off)?));
    }
    Ok(Activity {
        aid: ActivityId::new(raw.aid.0, raw.aid.1),
        component,
        ucaid,
        t_start: raw.t0,
        t_stop: raw.t1,
        attributes,
        parents: raw
            .parents
            .into_iter()
            .map(|(p, s)| ActivityId::new(p, s))
            .collect(),
        error: raw.err,
    })
}

fn decode_value(
    def: &AttributeDef,
    value: serde_json::Value,
    off: u64,
) -> Result<AttrValue, TraceError> {
    let mismatch = || {
        format_err(
            off,
            format!(
                "attribute {}/{} expects {}, got incompatible value",
                def.domain, def.name, def.datatype
            ),
        )
    };
    match def.datatype {
        Datatype::Int64 => value.as_i64().map(AttrValue::Int64).ok_or_else(mismatch),
        Datatype::Uint64 => value.as_u64().map(AttrValue::Uint64).ok_or_else(mismatch),
        Datatype::Float64 => value.as_f64().map(AttrValue::Float64).ok_or_else(mismatch),
        Datatype::Str => match value {
            serde_json::Value::String(s) => Ok(AttrValue::Str(s)),
            _ => Err(mismatch()),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::super::ActivityFactory;
    use super::*;

    fn sample() -> (Registries, Vec<Activity>) {
        let mut regs = Registries::default();
        let fh = regs
            .ontology
            .register("POSIX/descriptor", "filehandle", Datatype::Uint64)
            .unwrap();
        let name = regs
            .ontology
            .register("POSIX/descriptor", "filename", Datatype::Str)
            .unwrap();
        let comp = regs
            .system
            .register("POSIX", &["open", "write", "close"])
            .unwrap()
            .id;
        regs.associations.set("1/user", "alice").unwrap();
        let mut f = ActivityFactory::new();
        let open = f
            .build(
                &regs,
                1,
                comp,
                Ucaid(0),
                629_900,
                700_000,
                vec![
                    (name, AttrValue::Str("f1".into())),
                    (fh, AttrValue::Uint64(4)),
                ],
                vec![],
                0,
            )
            .unwrap();
        let write = f
            .build(
                &regs,
                1,
                comp,
                Ucaid(1),
                3_633_600,
                3_700_000,
                vec![(fh, AttrValue::Uint64(4))],
                vec![open.aid],
                0,
            )
            .unwrap();
        (regs, vec![open, write])
    }

    #[test]
    fn round_trip_preserves_everything() {
        let (regs, acts) = sample();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.trace");
        write_trace(&path, &acts, &regs).unwrap();
        let (regs2, acts2) = read_trace(&path).unwrap();
        assert_eq!(acts, acts2);
        assert_eq!(regs.ontology.defs(), regs2.ontology.defs());
        assert_eq!(regs.system.components(), regs2.system.components());
        assert_eq!(regs.associations, regs2.associations);

        let path2 = dir.path().join("t2.trace");
        write_trace(&path2, &acts2, &regs2).unwrap();
        assert_eq!(fs::read(&path).unwrap(), fs::read(&path2).unwrap());
    }

    #[test]
    fn body_is_sorted_on_write() {
        let (regs, mut acts) = sample();
        acts.reverse();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.trace");
        write_trace(&path, &acts, &regs).unwrap();
        let (_, read) = read_trace(&path).unwrap();
        assert!(read.windows(2).all(|w| (w[0].t_start, w[0].aid) <= (w[1].t_start, w[1].aid)));
    }

    #[test]
    fn truncated_body_reports_offset() {
        let (regs, acts) = sample();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.trace");
        write_trace(&path, &acts, &regs).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        let cut = bytes.len() - 10;
        bytes.truncate(cut);
        let broken = dir.path().join("broken.trace");
        fs::write(&broken, &bytes).unwrap();
        match read_trace(&broken) {
            Err(TraceError::Format { offset, .. }) => {
                assert!(offset > 0 && offset < cut as u64);
            }
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_ids_are_rejected() {
        let (regs, mut acts) = sample();
        acts[0].attributes.push((AttributeId(77), AttrValue::Uint64(1)));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.trace");
        // Bypass the factory checks by writing directly.
        write_trace(&path, &acts, &regs).unwrap();
        assert!(matches!(
            read_trace(&path),
            Err(TraceError::Format { .. })
        ));
    }
}
