//! Structured plugin reports, cross-process aggregation and text rendering.
//!
//! A [`Report`] is a tree two levels deep: named groups holding named fields.
//! Reports from several processes aggregate field-wise into `(avg, min, max)`
//! entries; rendering emits one line per field and [`parse_rendered`] inverts
//! the rendering for round-trip checks.

use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("field {group}/{field} mixes text and numeric values across reports")]
    TypeMismatch { group: String, field: String },
    #[error("field {group}/{field} is not finite")]
    NonFinite { group: String, field: String },
    #[error("bad report line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// One field value as produced by a plugin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ReportValue {
    Num(f64),
    Text(String),
}

/// Identity of the emitting plugin instance.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ReportSource {
    pub plugin: String,
    pub instance: u32,
    pub component: String,
}

/// A single plugin report: groups of named fields, in insertion order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub source: ReportSource,
    pub groups: IndexMap<String, IndexMap<String, ReportValue>>,
}

impl Report {
    pub fn new(plugin: &str, instance: u32, component: &str) -> Self {
        Report {
            source: ReportSource {
                plugin: plugin.to_string(),
                instance,
                component: component.to_string(),
            },
            groups: IndexMap::new(),
        }
    }

    /// Group name for file paths and other strings that may contain `/`.
    pub fn quoted_group(name: &str) -> String {
        format!("\"{name}\"")
    }

    pub fn put_num(&mut self, group: &str, field: &str, value: f64) {
        self.groups
            .entry(group.to_string())
            .or_default()
            .insert(field.to_string(), ReportValue::Num(value));
    }

    pub fn put_text(&mut self, group: &str, field: &str, value: &str) {
        self.groups
            .entry(group.to_string())
            .or_default()
            .insert(field.to_string(), ReportValue::Text(value.to_string()));
    }

    pub fn get(&self, group: &str, field: &str) -> Option<&ReportValue> {
        self.groups.get(group).and_then(|g| g.get(field))
    }
}

/// Elementwise aggregate of one numeric field across processes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregateEntry<T: Scalar> {
    pub avg: T,
    pub min: T,
    pub max: T,
}

/// Aggregated field: numeric entry or a shared text value, with the number
/// of reports the field was present in.
#[derive(Debug, Clone, PartialEq)]
pub enum AggregatedField<T: Scalar> {
    Stats(AggregateEntry<T>, usize),
    Text(String, usize),
}

/// Field-wise aggregation of reports from one plugin over one component.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedReport<T: Scalar> {
    pub source: ReportSource,
    pub groups: IndexMap<String, IndexMap<String, AggregatedField<T>>>,
}

/// Aggregates per-process reports field-wise.
///
/// Reports are matched by `(plugin, component)`; output order is sorted by
/// `(component, plugin, instance)` with the smallest contributing instance
/// kept as the rendered instance. Fields present in only a subset aggregate
/// over that subset, with the presence count retained.
pub fn aggregate<T: Scalar>(
    reports: &[Report],
) -> Result<Vec<AggregatedReport<T>>, ReportError> {
    let mut order: Vec<&Report> = reports.iter().collect();
    order.sort_by(|a, b| {
        (&a.source.component, &a.source.plugin, a.source.instance).cmp(&(
            &b.source.component,
            &b.source.plugin,
            b.source.instance,
        ))
    });

    let mut out: Vec<AggregatedReport<T>> = Vec::new();
    let mut index: IndexMap<(String, String), usize> = IndexMap::new();
    for report in order {
        let key = (
            report.source.plugin.clone(),
            report.source.component.clone(),
        );
        let slot = *index.entry(key).or_insert_with(|| {
            out.push(AggregatedReport {
                source: report.source.clone(),
                groups: IndexMap::new(),
            });
            out.len() - 1
        });
        merge_into(&mut out[slot], report)?;
    }
    Ok(out)
}

fn merge_into<T: Scalar>(
    agg: &mut AggregatedReport<T>,
    report: &Report,
) -> Result<(), ReportError> {
    for (group, fields) in &report.groups {
        let g = agg.groups.entry(group.clone()).or_default();
        for (field, value) in fields {
            match (g.get_mut(field), value) {
                (None, ReportValue::Num(v)) => {
                    if !v.is_finite() {
                        return Err(ReportError::NonFinite {
                            group: group.clone(),
                            field: field.clone(),
                        });
                    }
                    let v = T::from_f64(*v).unwrap_or_else(T::zero);
                    g.insert(
                        field.clone(),
                        AggregatedField::Stats(AggregateEntry { avg: v, min: v, max: v }, 1),
                    );
                }
                (None, ReportValue::Text(s)) => {
                    g.insert(field.clone(), AggregatedField::Text(s.clone(), 1));
                }
                (Some(AggregatedField::Stats(e, n)), ReportValue::Num(v)) => {
                    if !v.is_finite() {
                        return Err(ReportError::NonFinite {
                            group: group.clone(),
                            field: field.clone(),
                        });
                    }
                    let v = T::from_f64(*v).unwrap_or_else(T::zero);
                    let count = T::from_usize(*n).unwrap_or_else(T::one);
                    let next = T::from_usize(*n + 1).unwrap_or_else(T::one);
                    e.avg = (e.avg * count + v) / next;
                    e.min = e.min.min(v);
                    e.max = e.max.max(v);
                    *n += 1;
                }
                (Some(AggregatedField::Text(t, n)), ReportValue::Text(s)) => {
                    // Differing strings keep the first value; presence still counts.
                    let _ = s;
                    let _ = t;
                    *n += 1;
                }
                _ => {
                    return Err(ReportError::TypeMismatch {
                        group: group.clone(),
                        field: field.clone(),
                    });
                }
            }
        }
    }
    Ok(())
}

/// Renders aggregated reports, one line per field:
/// `[<plugin>:<instance>:"<component>"] <group>/<field> = (<avg>,<min>,<max>)`.
pub fn render<T: Scalar + fmt::Display>(reports: &[AggregatedReport<T>]) -> String {
    let mut out = String::new();
    for r in reports {
        for (group, fields) in &r.groups {
            for (field, value) in fields {
                out.push_str(&format!(
                    "[{}:{}:\"{}\"] {}/{} = ",
                    r.source.plugin, r.source.instance, r.source.component, group, field
                ));
                match value {
                    AggregatedField::Stats(e, _) => {
                        out.push_str(&format!("({},{},{})", e.avg, e.min, e.max));
                    }
                    AggregatedField::Text(s, _) => {
                        out.push_str(&format!("{s:?}"));
                    }
                }
                out.push('\n');
            }
        }
    }
    out
}

/// Parses rendered report text back into aggregated reports.
///
/// Presence counts are not part of the line grammar, so parsed entries carry
/// a count of one; `render(parse_rendered(s)) == s` still holds since counts
/// are never rendered.
pub fn parse_rendered(text: &str) -> Result<Vec<AggregatedReport<f64>>, ReportError> {
    let mut out: Vec<AggregatedReport<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let err = |reason: &str| ReportError::Parse {
            line: lineno + 1,
            reason: reason.to_string(),
        };
        let rest = line.strip_prefix('[').ok_or_else(|| err("missing ["))?;
        let (source_tok, rest) = rest.split_once("] ").ok_or_else(|| err("missing ]"))?;
        let (plugin, rest_src) = source_tok.split_once(':').ok_or_else(|| err("bad source"))?;
        let (instance, comp_tok) = rest_src.split_once(':').ok_or_else(|| err("bad source"))?;
        let instance: u32 = instance.parse().map_err(|_| err("bad instance"))?;
        let component = comp_tok
            .strip_prefix('"')
            .and_then(|c| c.strip_suffix('"'))
            .ok_or_else(|| err("component must be quoted"))?;

        let (path, value_tok) = rest.split_once(" = ").ok_or_else(|| err("missing ="))?;
        let (group, field) = split_group_field(path).ok_or_else(|| err("bad field path"))?;

        let value = if let Some(triple) = value_tok
            .strip_prefix('(')
            .and_then(|v| v.strip_suffix(')'))
        {
            let nums: Vec<&str> = triple.split(',').collect();
            if nums.len() != 3 {
                return Err(err("expected (avg,min,max)"));
            }
            let parse = |s: &str| s.parse::<f64>().map_err(|_| err("bad number"));
            AggregatedField::Stats(
                AggregateEntry {
                    avg: parse(nums[0])?,
                    min: parse(nums[1])?,
                    max: parse(nums[2])?,
                },
                1,
            )
        } else {
            let s: String =
                serde_json::from_str(value_tok).map_err(|_| err("bad text value"))?;
            AggregatedField::Text(s, 1)
        };

        let source = ReportSource {
            plugin: plugin.to_string(),
            instance,
            component: component.to_string(),
        };
        if out.last().map(|r| &r.source) != Some(&source) {
            out.push(AggregatedReport {
                source,
                groups: IndexMap::new(),
            });
        }
        out.last_mut()
            .unwrap()
            .groups
            .entry(group.to_string())
            .or_default()
            .insert(field.to_string(), value);
    }
    Ok(out)
}

/// Splits `group/field`, honoring quoted group names that may contain `/`.
fn split_group_field(path: &str) -> Option<(&str, &str)> {
    if let Some(rest) = path.strip_prefix('"') {
        let close = rest.find('"')?;
        let group = &path[..close + 2];
        let field = path[close + 2..].strip_prefix('/')?;
        Some((group, field))
    } else {
        path.split_once('/')
    }
}
