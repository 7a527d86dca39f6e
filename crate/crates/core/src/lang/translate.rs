//! Program evaluation and activity emission.
//!
//! [`translate`] runs one program over every record of a cursor, in order,
//! and assembles one activity per record through a [`TargetMapping`] that
//! binds program fields to the activity parts. Records that fail to evaluate
//! or convert land in the reject list with their reason; nothing is dropped
//! silently.
//!
//! Parent chaining uses chain-root semantics: a record whose parent field
//! evaluates to missing roots a new chain and registers its key field values;
//! `(parent-of "k")` then resolves to the most recent prior chain root whose
//! field `k` had the same value. An `open`, suppressing its own parent,
//! thereby becomes the parent of every later access to the same handle until
//! the handle is reopened.

use std::collections::HashMap;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::model::{ActivityFactory, ActivityId, AttrValue, Datatype, Registries, Ucaid};

use super::cursor::RecordCursor;
use super::sexpr::{Expr, ExprKind, Literal, SexprProgram};
use super::{open_source, FieldValue, LangError, SourceFormat};

/// One program field bound to a registered attribute.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttrBinding {
    pub field: String,
    pub domain: String,
    pub name: String,
    pub datatype: Datatype,
    /// Reject records where this field is missing instead of omitting the
    /// attribute.
    #[serde(default)]
    pub required: bool,
}

impl AttrBinding {
    pub fn new(field: &str, domain: &str, name: &str, datatype: Datatype) -> Self {
        AttrBinding {
            field: field.to_string(),
            domain: domain.to_string(),
            name: name.to_string(),
            datatype,
            required: false,
        }
    }
}

/// Binds program output fields to the parts of a unified activity.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetMapping {
    /// Process id all emitted activities carry; one cursor is one stream.
    #[serde(default = "default_pid")]
    pub pid: u32,
    pub layer: String,
    /// Operation names; a ucaid is an index into this list.
    pub ops: Vec<String>,
    /// Field holding the operation: a name from `ops`, or a numeric ucaid.
    pub op_field: String,
    pub t0_field: String,
    /// Missing binding or value makes activities instantaneous (t1 = t0).
    #[serde(default)]
    pub t1_field: Option<String>,
    /// Missing binding or value means success (0).
    #[serde(default)]
    pub err_field: Option<String>,
    /// Field carrying a `(parent-of ...)` result or missing.
    #[serde(default)]
    pub parent_field: Option<String>,
    #[serde(default)]
    pub attrs: Vec<AttrBinding>,
}

fn default_pid() -> u32 {
    1
}

/// Everything one translation run produced.
#[derive(Debug)]
pub struct Translation {
    pub registries: Registries,
    pub activities: Vec<crate::model::Activity>,
    pub rejects: Vec<Reject>,
}

/// One record that could not be translated, and why.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reject {
    pub record: usize,
    pub reason: String,
}

/// Evaluation-time value domain. `Bool` exists only between `eq` and `if`;
/// `Aid` only flows from `parent-of` into the parent binding.
#[derive(Debug, Clone, PartialEq)]
enum Value {
    Int(i64),
    Uint(u64),
    Float(f64),
    Str(String),
    Bool(bool),
    Aid(ActivityId),
    Missing,
}

impl From<FieldValue> for Value {
    fn from(v: FieldValue) -> Self {
        match v {
            FieldValue::Int64(v) => Value::Int(v),
            FieldValue::Uint64(v) => Value::Uint(v),
            FieldValue::Float64(v) => Value::Float(v),
            FieldValue::Str(s) => Value::Str(s),
            FieldValue::Missing => Value::Missing,
        }
    }
}

/// Hashable identity of a value, used as the chain registration key.
/// Non-negative integers collapse to one key regardless of signedness.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum ValueKey {
    Int(i64),
    Uint(u64),
    Float(u64),
    Str(String),
    Bool(bool),
}

impl ValueKey {
    fn of(v: &Value) -> Option<ValueKey> {
        match v {
            Value::Int(i) if *i >= 0 => Some(ValueKey::Uint(*i as u64)),
            Value::Int(i) => Some(ValueKey::Int(*i)),
            Value::Uint(u) => Some(ValueKey::Uint(*u)),
            Value::Float(f) => {
                let f = if *f == 0.0 { 0.0 } else { *f };
                Some(ValueKey::Float(f.to_bits()))
            }
            Value::Str(s) => Some(ValueKey::Str(s.clone())),
            Value::Bool(b) => Some(ValueKey::Bool(*b)),
            Value::Aid(_) | Value::Missing => None,
        }
    }
}

struct Evaluator<'a> {
    cursor: &'a RecordCursor,
    record: usize,
    /// Memoized source fields; each is parsed at most once per record.
    source: HashMap<String, Value>,
    /// Program fields computed so far, in declaration order.
    fields: IndexMap<String, Value>,
    chains: &'a HashMap<(String, ValueKey), ActivityId>,
}

impl Evaluator<'_> {
    fn eval(&mut self, expr: &Expr) -> Result<Value, LangError> {
        let (record, line, col) = (self.record, expr.pos.line, expr.pos.col);
        let fail = move |cause: String| LangError::Eval {
            record,
            line,
            col,
            cause,
        };
        match &expr.kind {
            ExprKind::Get(name) => {
                if let Some(v) = self.source.get(name) {
                    return Ok(v.clone());
                }
                let v: Value = self.cursor.get_field(self.record, name)?.into();
                self.source.insert(name.clone(), v.clone());
                Ok(v)
            }
            ExprKind::Const(lit) => Ok(match lit {
                Literal::Int(v) => Value::Int(*v),
                Literal::Float(v) => Value::Float(*v),
                Literal::Str(s) => Value::Str(s.clone()),
            }),
            ExprKind::ToInt(e) => match self.eval(e)? {
                Value::Missing => Ok(Value::Missing),
                Value::Int(v) => Ok(Value::Int(v)),
                Value::Uint(v) => i64::try_from(v)
                    .map(Value::Int)
                    .map_err(|_| fail(format!("{v} overflows int64"))),
                Value::Float(f) => float_to_i64(f.trunc()).map(Value::Int).ok_or_else(|| {
                    fail(format!("{f} is out of int64 range"))
                }),
                Value::Str(s) => {
                    if let Ok(v) = s.trim().parse::<i64>() {
                        return Ok(Value::Int(v));
                    }
                    match s.trim().parse::<f64>() {
                        Ok(f) => float_to_i64(f.trunc())
                            .map(Value::Int)
                            .ok_or_else(|| fail(format!("{s:?} is out of int64 range"))),
                        Err(_) => Err(fail(format!("cannot convert {s:?} to int"))),
                    }
                }
                other => Err(fail(format!("cannot convert {} to int", kind_name(&other)))),
            },
            ExprKind::ToFloat(e) => match self.eval(e)? {
                Value::Missing => Ok(Value::Missing),
                Value::Int(v) => Ok(Value::Float(v as f64)),
                Value::Uint(v) => Ok(Value::Float(v as f64)),
                Value::Float(f) => Ok(Value::Float(f)),
                Value::Str(s) => s
                    .trim()
                    .parse::<f64>()
                    .map(Value::Float)
                    .map_err(|_| fail(format!("cannot convert {s:?} to float"))),
                other => Err(fail(format!(
                    "cannot convert {} to float",
                    kind_name(&other)
                ))),
            },
            ExprKind::Scale(e, factor) => match self.eval(e)? {
                Value::Missing => Ok(Value::Missing),
                Value::Int(v) => Ok(Value::Float(v as f64 * factor)),
                Value::Uint(v) => Ok(Value::Float(v as f64 * factor)),
                Value::Float(f) => Ok(Value::Float(f * factor)),
                Value::Str(s) => s
                    .trim()
                    .parse::<f64>()
                    .map(|f| Value::Float(f * factor))
                    .map_err(|_| fail(format!("cannot scale {s:?}"))),
                other => Err(fail(format!("cannot scale {}", kind_name(&other)))),
            },
            ExprKind::Concat(parts) => {
                let mut out = String::new();
                for part in parts {
                    match self.eval(part)? {
                        Value::Missing => return Ok(Value::Missing),
                        Value::Str(s) => out.push_str(&s),
                        Value::Int(v) => out.push_str(&v.to_string()),
                        Value::Uint(v) => out.push_str(&v.to_string()),
                        Value::Float(f) => out.push_str(&f.to_string()),
                        other => {
                            return Err(fail(format!(
                                "cannot concat {}",
                                kind_name(&other)
                            )));
                        }
                    }
                }
                Ok(Value::Str(out))
            }
            ExprKind::If(cond, then, alt) => match self.eval(cond)? {
                Value::Bool(true) => self.eval(then),
                Value::Bool(false) => self.eval(alt),
                Value::Missing => Ok(Value::Missing),
                other => Err(fail(format!(
                    "if condition must be boolean, got {}",
                    kind_name(&other)
                ))),
            },
            ExprKind::Eq(a, b) => {
                let va = self.eval(a)?;
                let vb = self.eval(b)?;
                Ok(eq_values(&va, &vb))
            }
            ExprKind::ParentOf(name) => {
                // The field is declared earlier, so it is already computed.
                let v = self.fields.get(name).cloned().unwrap_or(Value::Missing);
                let Some(key) = ValueKey::of(&v) else {
                    return Ok(Value::Missing);
                };
                match self.chains.get(&(name.clone(), key)) {
                    Some(aid) => Ok(Value::Aid(*aid)),
                    None => Err(LangError::UnresolvedParent {
                        record: self.record,
                        field: name.clone(),
                    }),
                }
            }
        }
    }
}

fn kind_name(v: &Value) -> &'static str {
    match v {
        Value::Int(_) => "int",
        Value::Uint(_) => "uint",
        Value::Float(_) => "float",
        Value::Str(_) => "string",
        Value::Bool(_) => "bool",
        Value::Aid(_) => "activity id",
        Value::Missing => "missing",
    }
}

fn eq_values(a: &Value, b: &Value) -> Value {
    if matches!(a, Value::Missing) || matches!(b, Value::Missing) {
        return Value::Missing;
    }
    let num = |v: &Value| -> Option<f64> {
        match v {
            Value::Int(i) => Some(*i as f64),
            Value::Uint(u) => Some(*u as f64),
            Value::Float(f) => Some(*f),
            _ => None,
        }
    };
    let eq = match (a, b) {
        (Value::Str(x), Value::Str(y)) => x == y,
        (Value::Bool(x), Value::Bool(y)) => x == y,
        (Value::Aid(x), Value::Aid(y)) => x == y,
        _ => match (num(a), num(b)) {
            (Some(x), Some(y)) => x == y,
            _ => false,
        },
    };
    Value::Bool(eq)
}

fn float_to_i64(f: f64) -> Option<i64> {
    if f.is_finite() && (i64::MIN as f64..=i64::MAX as f64).contains(&f) {
        Some(f as i64)
    } else {
        None
    }
}

/// Conversion at an integral boundary: floats round half to even.
fn value_to_u64(v: &Value) -> Result<u64, String> {
    match v {
        Value::Int(i) => u64::try_from(*i).map_err(|_| format!("{i} is negative")),
        Value::Uint(u) => Ok(*u),
        Value::Float(f) => {
            let r = f.round_ties_even();
            if r.is_finite() && (0.0..=u64::MAX as f64).contains(&r) {
                Ok(r as u64)
            } else {
                Err(format!("{f} is out of uint64 range"))
            }
        }
        Value::Str(s) => {
            if let Ok(v) = s.trim().parse::<u64>() {
                return Ok(v);
            }
            s.trim()
                .parse::<f64>()
                .ok()
                .map(|f| f.round_ties_even())
                .filter(|r| r.is_finite() && (0.0..=u64::MAX as f64).contains(r))
                .map(|r| r as u64)
                .ok_or_else(|| format!("cannot convert {s:?} to uint64"))
        }
        other => Err(format!("cannot convert {} to uint64", kind_name(other))),
    }
}

fn value_to_i64(v: &Value) -> Result<i64, String> {
    match v {
        Value::Int(i) => Ok(*i),
        Value::Uint(u) => i64::try_from(*u).map_err(|_| format!("{u} overflows int64")),
        Value::Float(f) => {
            float_to_i64(f.round_ties_even()).ok_or_else(|| format!("{f} out of int64 range"))
        }
        Value::Str(s) => s
            .trim()
            .parse::<i64>()
            .map_err(|_| format!("cannot convert {s:?} to int64")),
        other => Err(format!("cannot convert {} to int64", kind_name(other))),
    }
}

fn value_to_attr(v: &Value, datatype: Datatype) -> Result<AttrValue, String> {
    match datatype {
        Datatype::Uint64 => value_to_u64(v).map(AttrValue::Uint64),
        Datatype::Int64 => value_to_i64(v).map(AttrValue::Int64),
        Datatype::Float64 => match v {
            Value::Int(i) => Ok(AttrValue::Float64(*i as f64)),
            Value::Uint(u) => Ok(AttrValue::Float64(*u as f64)),
            Value::Float(f) if f.is_finite() => Ok(AttrValue::Float64(*f)),
            Value::Float(f) => Err(format!("{f} is not finite")),
            Value::Str(s) => s
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|f| f.is_finite())
                .map(AttrValue::Float64)
                .ok_or_else(|| format!("cannot convert {s:?} to float64")),
            other => Err(format!("cannot convert {} to float64", kind_name(other))),
        },
        Datatype::Str => match v {
            Value::Str(s) => Ok(AttrValue::Str(s.clone())),
            Value::Int(i) => Ok(AttrValue::Str(i.to_string())),
            Value::Uint(u) => Ok(AttrValue::Str(u.to_string())),
            Value::Float(f) => Ok(AttrValue::Str(f.to_string())),
            other => Err(format!("cannot convert {} to string", kind_name(other))),
        },
    }
}

/// Names of fields any `(parent-of ...)` in the program keys on.
fn parent_keys(program: &SexprProgram) -> Vec<String> {
    fn walk(expr: &Expr, out: &mut Vec<String>) {
        match &expr.kind {
            ExprKind::ParentOf(name) => {
                if !out.contains(name) {
                    out.push(name.clone());
                }
            }
            ExprKind::ToInt(e) | ExprKind::ToFloat(e) | ExprKind::Scale(e, _) => walk(e, out),
            ExprKind::Concat(es) => es.iter().for_each(|e| walk(e, out)),
            ExprKind::If(a, b, c) => {
                walk(a, out);
                walk(b, out);
                walk(c, out);
            }
            ExprKind::Eq(a, b) => {
                walk(a, out);
                walk(b, out);
            }
            ExprKind::Get(_) | ExprKind::Const(_) => {}
        }
    }
    let mut out = Vec::new();
    for (_, expr) in &program.fields {
        walk(expr, &mut out);
    }
    out
}

/// Runs `program` over every record of `cursor` and emits unified activities
/// per `mapping`, in record order. Top-level errors abort; per-record
/// failures are collected as rejects and translation continues.
pub fn translate(
    cursor: &RecordCursor,
    program: &SexprProgram,
    mapping: &TargetMapping,
) -> Result<Translation, LangError> {
    let declared = |f: &str| program.fields.iter().any(|(n, _)| n == f);
    let mut need: Vec<&str> = vec![&mapping.op_field, &mapping.t0_field];
    need.extend(mapping.t1_field.as_deref());
    need.extend(mapping.err_field.as_deref());
    need.extend(mapping.parent_field.as_deref());
    need.extend(mapping.attrs.iter().map(|a| a.field.as_str()));
    for f in need {
        if !declared(f) {
            return Err(LangError::BadMapping(format!(
                "program has no field {f:?}"
            )));
        }
    }
    if mapping.ops.is_empty() {
        return Err(LangError::BadMapping("mapping has no operations".into()));
    }

    let mut regs = Registries::default();
    let ops: Vec<&str> = mapping.ops.iter().map(String::as_str).collect();
    let component = regs.system.register(&mapping.layer, &ops)?.id;
    let mut attr_ids = Vec::with_capacity(mapping.attrs.len());
    for b in &mapping.attrs {
        attr_ids.push(regs.ontology.register(&b.domain, &b.name, b.datatype)?);
    }

    let keys = parent_keys(program);
    let mut chains: HashMap<(String, ValueKey), ActivityId> = HashMap::new();
    let mut factory = ActivityFactory::new();
    let mut activities = Vec::new();
    let mut rejects = Vec::new();

    'records: for record in 0..cursor.record_count() {
        let reject = |reason: String, rejects: &mut Vec<Reject>| {
            rejects.push(Reject { record, reason });
        };

        // Evaluate every declared field, in order.
        let mut ev = Evaluator {
            cursor,
            record,
            source: HashMap::new(),
            fields: IndexMap::new(),
            chains: &chains,
        };
        for (name, expr) in &program.fields {
            match ev.eval(expr) {
                Ok(v) => {
                    ev.fields.insert(name.clone(), v);
                }
                Err(e) => {
                    reject(e.to_string(), &mut rejects);
                    continue 'records;
                }
            }
        }
        let fields = ev.fields;

        // Assemble the activity parts.
        let ucaid = match &fields[&mapping.op_field] {
            Value::Str(name) => match mapping.ops.iter().position(|o| o == name) {
                Some(i) => Ucaid(i as u32),
                None => {
                    reject(format!("unknown operation {name:?}"), &mut rejects);
                    continue;
                }
            },
            Value::Int(_) | Value::Uint(_) => {
                let v = value_to_u64(&fields[&mapping.op_field]).unwrap_or(u64::MAX);
                if (v as usize) < mapping.ops.len() {
                    Ucaid(v as u32)
                } else {
                    reject(format!("ucaid {v} out of range"), &mut rejects);
                    continue;
                }
            }
            Value::Missing => {
                reject("missing operation field".into(), &mut rejects);
                continue;
            }
            other => {
                reject(
                    format!("operation field is {}", kind_name(other)),
                    &mut rejects,
                );
                continue;
            }
        };

        let t0 = match &fields[&mapping.t0_field] {
            Value::Missing => {
                reject("missing start time".into(), &mut rejects);
                continue;
            }
            v => match value_to_u64(v) {
                Ok(t) => t,
                Err(e) => {
                    reject(format!("start time: {e}"), &mut rejects);
                    continue;
                }
            },
        };
        let t1 = match mapping.t1_field.as_deref().map(|f| &fields[f]) {
            None | Some(Value::Missing) => t0,
            Some(v) => match value_to_u64(v) {
                Ok(t) => t,
                Err(e) => {
                    reject(format!("stop time: {e}"), &mut rejects);
                    continue;
                }
            },
        };
        let error = match mapping.err_field.as_deref().map(|f| &fields[f]) {
            None | Some(Value::Missing) => 0,
            Some(v) => match value_to_i64(v) {
                Ok(e) => e,
                Err(e) => {
                    reject(format!("error code: {e}"), &mut rejects);
                    continue;
                }
            },
        };
        let parents = match mapping.parent_field.as_deref().map(|f| &fields[f]) {
            None | Some(Value::Missing) => Vec::new(),
            Some(Value::Aid(aid)) => vec![*aid],
            Some(other) => {
                reject(
                    format!("parent field must be an activity id, got {}", kind_name(other)),
                    &mut rejects,
                );
                continue;
            }
        };

        let mut attributes = Vec::new();
        for (binding, id) in mapping.attrs.iter().zip(&attr_ids) {
            match &fields[&binding.field] {
                Value::Missing => {
                    if binding.required {
                        reject(
                            format!("missing required field {:?}", binding.field),
                            &mut rejects,
                        );
                        continue 'records;
                    }
                }
                v => match value_to_attr(v, binding.datatype) {
                    Ok(av) => attributes.push((*id, av)),
                    Err(e) => {
                        reject(format!("attribute {}: {e}", binding.name), &mut rejects);
                        continue 'records;
                    }
                },
            }
        }

        let is_root = parents.is_empty();
        match factory.build(
            &regs, mapping.pid, component, ucaid, t0, t1, attributes, parents, error,
        ) {
            Ok(activity) => {
                if is_root && mapping.parent_field.is_some() {
                    for key_field in &keys {
                        if let Some(key) = ValueKey::of(&fields[key_field]) {
                            chains.insert((key_field.clone(), key), activity.aid);
                        }
                    }
                }
                activities.push(activity);
            }
            Err(e) => reject(e.to_string(), &mut rejects),
        }
    }

    Ok(Translation {
        registries: regs,
        activities,
        rejects,
    })
}

/// The bundled strace-subset translation program.
///
/// `fd` unifies the handle: an `open` returns it, every other call passes it
/// as the first argument. Opens suppress their parent and so root the chain
/// each later access of the same handle attaches to.
pub const STRACE_PROGRAM: &str = r#"
; strace-subset -> unified activities
(record
  (field "op" (get "name"))
  (field "t" (scale (to-float (get "ts")) 1000000000))
  (field "fd" (if (eq (get "name") (const "open")) (get "ret") (get "arg0")))
  (field "file" (if (eq (get "name") (const "open")) (get "arg0") (get "none")))
  (field "bytes_read" (if (eq (get "name") (const "read")) (get "ret") (get "none")))
  (field "bytes_written" (if (eq (get "name") (const "write")) (get "ret") (get "none")))
  (field "position" (if (eq (get "name") (const "lseek")) (get "ret") (get "none")))
  (field "err" (const 0))
  (field "parent" (if (eq (get "name") (const "open")) (get "none") (parent-of "fd"))))
"#;

/// Parses [`STRACE_PROGRAM`].
pub fn strace_program() -> SexprProgram {
    super::parse_program(STRACE_PROGRAM).expect("bundled strace program parses")
}

/// Mapping for [`STRACE_PROGRAM`] onto a POSIX component.
pub fn strace_mapping(pid: u32) -> TargetMapping {
    TargetMapping {
        pid,
        layer: "POSIX".into(),
        ops: ["open", "read", "write", "lseek", "close"]
            .map(String::from)
            .to_vec(),
        op_field: "op".into(),
        t0_field: "t".into(),
        t1_field: None,
        err_field: Some("err".into()),
        parent_field: Some("parent".into()),
        attrs: vec![
            AttrBinding::new("file", "POSIX/descriptor", "filename", Datatype::Str),
            AttrBinding::new("fd", "POSIX/descriptor", "filehandle", Datatype::Uint64),
            AttrBinding::new("bytes_read", "POSIX/quantity", "BytesRead", Datatype::Uint64),
            AttrBinding::new(
                "bytes_written",
                "POSIX/quantity",
                "BytesWritten",
                Datatype::Uint64,
            ),
            AttrBinding::new("position", "POSIX/file", "position", Datatype::Uint64),
        ],
    }
}

/// Translates an strace-subset file with the bundled program, as process 1.
pub fn ingest_strace(path: impl AsRef<Path>) -> Result<Translation, LangError> {
    let cursor = open_source(path, SourceFormat::StraceText)?;
    translate(&cursor, &strace_program(), &strace_mapping(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse_program;
    use crate::model::{render_line, resolve};

    fn strace_cursor(text: &str) -> RecordCursor {
        RecordCursor::from_text(text.to_string(), SourceFormat::StraceText).unwrap()
    }

    #[test]
    fn fig_open_line_translates() {
        let cursor = strace_cursor("0.0006299 open(\"f1\") = 4\n");
        let out = translate(&cursor, &strace_program(), &strace_mapping(1)).unwrap();
        assert!(out.rejects.is_empty());
        assert_eq!(out.activities.len(), 1);
        let a = &out.activities[0];
        assert_eq!(a.t_start, 629_900);
        assert_eq!(a.t_stop, 629_900);
        assert_eq!(a.error, 0);
        let r = resolve(a, &out.registries).unwrap();
        assert_eq!(r.op, "open");
        assert_eq!(
            render_line(a, &out.registries).unwrap(),
            "0.0006299 ID1.1 POSIX open(POSIX/descriptor/filename=\"f1\",POSIX/descriptor/filehandle=4) = 0"
        );
    }

    #[test]
    fn chain_root_parents_point_at_the_open() {
        let cursor = strace_cursor(
            "0.0006299 open(\"f1\") = 4\n\
             0.0008125 write(4, \"...\", 10240) = 10240\n\
             0.0009000 write(4, \"...\", 512) = 512\n\
             0.0011000 close(4) = 0\n",
        );
        let out = translate(&cursor, &strace_program(), &strace_mapping(1)).unwrap();
        assert!(out.rejects.is_empty());
        let open = &out.activities[0];
        assert!(open.parents.is_empty());
        // both writes and the close attach to the open, not to each other
        for a in &out.activities[1..] {
            assert_eq!(a.parents, vec![open.aid]);
        }
        let w = resolve(&out.activities[1], &out.registries).unwrap();
        assert!(w
            .attributes
            .iter()
            .any(|(n, v)| n == "POSIX/quantity/BytesWritten" && *v == AttrValue::Uint64(10240)));
    }

    #[test]
    fn reopened_handles_root_a_new_chain() {
        let cursor = strace_cursor(
            "0.1 open(\"a\") = 4\n\
             0.2 close(4) = 0\n\
             0.3 open(\"b\") = 4\n\
             0.4 read(4, \"\", 100) = 100\n",
        );
        let out = translate(&cursor, &strace_program(), &strace_mapping(1)).unwrap();
        assert!(out.rejects.is_empty());
        assert_eq!(out.activities[1].parents, vec![out.activities[0].aid]);
        assert_eq!(out.activities[3].parents, vec![out.activities[2].aid]);
    }

    #[test]
    fn access_without_open_is_rejected_not_dropped() {
        let cursor = strace_cursor(
            "0.1 write(9, \"x\", 5) = 5\n0.2 open(\"f\") = 4\n0.3 write(4, \"y\", 3) = 3\n",
        );
        let out = translate(&cursor, &strace_program(), &strace_mapping(1)).unwrap();
        assert_eq!(out.activities.len(), 2);
        assert_eq!(out.rejects.len(), 1);
        assert_eq!(out.rejects[0].record, 0);
        assert!(out.rejects[0].reason.contains("parent"), "{}", out.rejects[0].reason);
    }

    #[test]
    fn malformed_line_is_rejected_with_its_index() {
        let cursor = strace_cursor(
            "0.1 open(\"f\") = 4\nnot a trace line\n0.3 close(4) = 0\n",
        );
        let out = translate(&cursor, &strace_program(), &strace_mapping(1)).unwrap();
        assert_eq!(out.activities.len(), 2);
        assert_eq!(out.rejects.len(), 1);
        assert_eq!(out.rejects[0].record, 1);
    }

    #[test]
    fn output_order_matches_record_order() {
        let text: String = (0..50)
            .map(|i| format!("0.{i:04} open(\"f{i}\") = {}\n", i + 3))
            .collect();
        let cursor = strace_cursor(&text);
        let out = translate(&cursor, &strace_program(), &strace_mapping(1)).unwrap();
        assert_eq!(out.activities.len(), 50);
        for (i, a) in out.activities.iter().enumerate() {
            assert_eq!(a.aid.seq, i as u64 + 1);
            assert!(i == 0 || out.activities[i - 1].t_start <= a.t_start);
        }
    }

    #[test]
    fn csv_program_with_conversions() {
        let cursor = RecordCursor::from_text(
            "syscall,start,bytes\nwrite,1.5,100\nread,2.25,50\n".to_string(),
            SourceFormat::csv(),
        )
        .unwrap();
        let program = parse_program(
            r#"(record
                 (field "op" (get "syscall"))
                 (field "t" (scale (to-float (get "start")) 1000000000))
                 (field "n" (to-int (get "bytes"))))"#,
        )
        .unwrap();
        let mapping = TargetMapping {
            pid: 7,
            layer: "POSIX".into(),
            ops: vec!["read".into(), "write".into()],
            op_field: "op".into(),
            t0_field: "t".into(),
            t1_field: None,
            err_field: None,
            parent_field: None,
            attrs: vec![AttrBinding::new(
                "n",
                "POSIX/quantity",
                "Bytes",
                Datatype::Uint64,
            )],
        };
        let out = translate(&cursor, &program, &mapping).unwrap();
        assert!(out.rejects.is_empty());
        assert_eq!(out.activities[0].t_start, 1_500_000_000);
        assert_eq!(out.activities[1].t_start, 2_250_000_000);
        assert_eq!(out.activities[0].aid.pid, 7);
        assert_eq!(
            out.activities[1].attributes[0].1,
            AttrValue::Uint64(50)
        );
    }

    #[test]
    fn missing_required_field_is_reported() {
        let cursor = RecordCursor::from_text(
            "op,fd\nopen,4\nopen,\n".to_string(),
            SourceFormat::csv(),
        )
        .unwrap();
        let program = parse_program(
            r#"(record
                 (field "op" (get "op"))
                 (field "t" (const 0))
                 (field "h" (get "missing_column")))"#,
        )
        .unwrap();
        let mut mapping = TargetMapping {
            pid: 1,
            layer: "POSIX".into(),
            ops: vec!["open".into()],
            op_field: "op".into(),
            t0_field: "t".into(),
            t1_field: None,
            err_field: None,
            parent_field: None,
            attrs: vec![AttrBinding::new(
                "h",
                "POSIX/descriptor",
                "filehandle",
                Datatype::Uint64,
            )],
        };
        mapping.attrs[0].required = true;
        let out = translate(&cursor, &program, &mapping).unwrap();
        assert!(out.activities.is_empty());
        assert_eq!(out.rejects.len(), 2);
        assert!(out.rejects[0].reason.contains("required"));
    }

    #[test]
    fn to_int_truncates_toward_zero() {
        let cursor = RecordCursor::from_text(
            "v\n2.7\n-2.7\n17\n".to_string(),
            SourceFormat::csv(),
        )
        .unwrap();
        let program = parse_program(
            r#"(record (field "op" (const 0)) (field "t" (const 0))
                       (field "n" (to-int (get "v"))))"#,
        )
        .unwrap();
        let mapping = TargetMapping {
            pid: 1,
            layer: "L".into(),
            ops: vec!["x".into()],
            op_field: "op".into(),
            t0_field: "t".into(),
            t1_field: None,
            err_field: None,
            parent_field: None,
            attrs: vec![AttrBinding::new("n", "d", "n", Datatype::Int64)],
        };
        let out = translate(&cursor, &program, &mapping).unwrap();
        assert!(out.rejects.is_empty());
        let vals: Vec<&AttrValue> = out.activities.iter().map(|a| &a.attributes[0].1).collect();
        assert_eq!(
            vals,
            [
                &AttrValue::Int64(2),
                &AttrValue::Int64(-2),
                &AttrValue::Int64(17)
            ]
        );
    }

    #[test]
    fn integral_targets_round_half_even() {
        // 0.5 and 1.5 scaled by 1 land exactly on .5 ties
        let cursor = RecordCursor::from_text(
            "v\n0.5\n1.5\n2.5\n".to_string(),
            SourceFormat::csv(),
        )
        .unwrap();
        let program = parse_program(
            r#"(record (field "op" (const 0))
                       (field "t" (scale (to-float (get "v")) 1)))"#,
        )
        .unwrap();
        let mapping = TargetMapping {
            pid: 1,
            layer: "L".into(),
            ops: vec!["x".into()],
            op_field: "op".into(),
            t0_field: "t".into(),
            t1_field: None,
            err_field: None,
            parent_field: None,
            attrs: vec![],
        };
        let out = translate(&cursor, &program, &mapping).unwrap();
        let t: Vec<u64> = out.activities.iter().map(|a| a.t_start).collect();
        assert_eq!(t, [0, 2, 2]);
    }

    #[test]
    fn concat_and_eq_work_over_jsonl() {
        let cursor = RecordCursor::from_text(
            r#"{"a": "x", "b": 7, "kind": "w"}"#.to_string(),
            SourceFormat::JsonLines,
        )
        .unwrap();
        let program = parse_program(
            r#"(record
                 (field "op" (if (eq (get "kind") (const "w")) (const "write") (const "read")))
                 (field "t" (const 0))
                 (field "tag" (concat (get "a") (const "-") (get "b"))))"#,
        )
        .unwrap();
        let mapping = TargetMapping {
            pid: 1,
            layer: "L".into(),
            ops: vec!["read".into(), "write".into()],
            op_field: "op".into(),
            t0_field: "t".into(),
            t1_field: None,
            err_field: None,
            parent_field: None,
            attrs: vec![AttrBinding::new("tag", "d", "tag", Datatype::Str)],
        };
        let out = translate(&cursor, &program, &mapping).unwrap();
        assert!(out.rejects.is_empty());
        assert_eq!(out.activities[0].ucaid, Ucaid(1));
        assert_eq!(
            out.activities[0].attributes[0].1,
            AttrValue::Str("x-7".to_string())
        );
    }

    #[test]
    fn unknown_operation_is_rejected() {
        let cursor = strace_cursor("0.1 open(\"f\") = 4\n0.2 mmap(4, 4096) = 0\n");
        let out = translate(&cursor, &strace_program(), &strace_mapping(1)).unwrap();
        assert_eq!(out.activities.len(), 1);
        assert_eq!(out.rejects.len(), 1);
        assert_eq!(out.rejects[0].record, 1);
        assert!(out.rejects[0].reason.contains("mmap"));
    }

    #[test]
    fn mapping_must_bind_declared_fields() {
        let cursor = strace_cursor("0.1 open(\"f\") = 4\n");
        let mut mapping = strace_mapping(1);
        mapping.t0_field = "no_such_field".into();
        assert!(matches!(
            translate(&cursor, &strace_program(), &mapping),
            Err(LangError::BadMapping(_))
        ));
    }

    #[test]
    fn translation_is_deterministic() {
        let text = "0.1 open(\"f\") = 4\n0.2 write(4, \"x\", 8) = 8\n0.3 close(4) = 0\n";
        let one = translate(
            &strace_cursor(text),
            &strace_program(),
            &strace_mapping(1),
        )
        .unwrap();
        let two = translate(
            &strace_cursor(text),
            &strace_program(),
            &strace_mapping(1),
        )
        .unwrap();
        assert_eq!(one.activities, two.activities);
    }

    #[test]
    fn bundled_program_parses_two_source_fields_for_close() {
        // close touches name, ts, arg0 and ret: 4 of the record's fields,
        // each parsed exactly once despite many (get ...) occurrences.
        let cursor = strace_cursor("0.1 open(\"f\") = 4\n0.2 close(4) = 0\n");
        translate(&cursor, &strace_program(), &strace_mapping(1)).unwrap();
        assert!(cursor.fields_parsed() <= 8, "got {}", cursor.fields_parsed());
    }
}
