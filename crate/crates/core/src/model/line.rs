//! One-line human readable rendering of activities, and its parser.
//!
//! Grammar: `<seconds> <ID> <component> <op>(<attr>=<val>,...) = <err> [<parent IDs>]`
//! where `<seconds>` is the start time with exactly seven decimals, ids are
//! `ID<pid>.<seq>`, attributes use their `domain/name` form and string values
//! are double-quoted. Component and operation names must not contain `(`.

use std::fmt::Write as _;

use thiserror::Error;

use super::{resolve, Activity, ActivityId, AttrValue, ModelError, Registries};

const NS_PER_SEC: u64 = 1_000_000_000;

#[derive(Debug, Error)]
pub enum LineError {
    #[error("bad activity line: {0}")]
    Bad(String),
}

fn bad(reason: impl Into<String>) -> LineError {
    LineError::Bad(reason.into())
}

/// The structural content of one rendered line.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedLine {
    /// Start time in ns; the rendering truncates below 100 ns.
    pub t_start: u64,
    pub aid: ActivityId,
    pub layer: String,
    pub op: String,
    pub attributes: Vec<(String, AttrValue)>,
    pub error: i64,
    pub parents: Vec<ActivityId>,
}

/// Renders one activity as a single line.
pub fn render_line(a: &Activity, regs: &Registries) -> Result<String, ModelError> {
    let r = resolve(a, regs)?;
    let mut out = String::new();
    let _ = write!(
        out,
        "{}.{:07} {} {} {}(",
        a.t_start / NS_PER_SEC,
        (a.t_start % NS_PER_SEC) / 100,
        a.aid,
        r.layer,
        r.op
    );
    for (i, (name, value)) in r.attributes.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(name);
        out.push('=');
        render_value(&mut out, value);
    }
    let _ = write!(out, ") = {}", a.error);
    for p in &a.parents {
        let _ = write!(out, " {p}");
    }
    Ok(out)
}

fn render_value(out: &mut String, value: &AttrValue) {
    match value {
        AttrValue::Int64(v) => {
            let _ = write!(out, "{v}");
        }
        AttrValue::Uint64(v) => {
            let _ = write!(out, "{v}");
        }
        AttrValue::Float64(v) => {
            let _ = write!(out, "{v}");
        }
        AttrValue::Str(s) => {
            out.push('"');
            for c in s.chars() {
                match c {
                    '"' => out.push_str("\\\""),
                    '\\' => out.push_str("\\\\"),
                    '\n' => out.push_str("\\n"),
                    '\t' => out.push_str("\\t"),
                    '\r' => out.push_str("\\r"),
                    _ => out.push(c),
                }
            }
            out.push('"');
        }
    }
}

/// Parses one rendered line back into its structural parts.
pub fn parse_line(line: &str) -> Result<ParsedLine, LineError> {
    let line = line.trim_end_matches('\n');
    let (secs_tok, rest) = line
        .split_once(' ')
        .ok_or_else(|| bad("missing timestamp"))?;
    let t_start = parse_seconds(secs_tok)?;
    let (id_tok, rest) = rest.split_once(' ').ok_or_else(|| bad("missing id"))?;
    let aid = parse_id(id_tok)?;

    let paren = rest.find('(').ok_or_else(|| bad("missing open paren"))?;
    let head = &rest[..paren];
    let (layer, op) = head
        .rsplit_once(' ')
        .ok_or_else(|| bad("missing component or op"))?;
    if layer.is_empty() || op.is_empty() {
        return Err(bad("empty component or op"));
    }

    let args_start = paren + 1;
    let close = find_close(&rest[args_start..])
        .ok_or_else(|| bad("unterminated attribute list"))?;
    let args = &rest[args_start..args_start + close];
    let attributes = parse_attrs(args)?;

    let tail = &rest[args_start + close + 1..];
    let tail = tail
        .strip_prefix(" = ")
        .ok_or_else(|| bad("missing error separator"))?;
    let mut toks = tail.split(' ').filter(|t| !t.is_empty());
    let err_tok = toks.next().ok_or_else(|| bad("missing error code"))?;
    let error: i64 = err_tok
        .parse()
        .map_err(|_| bad(format!("bad error code {err_tok:?}")))?;
    let mut parents = Vec::new();
    for t in toks {
        parents.push(parse_id(t)?);
    }

    Ok(ParsedLine {
        t_start,
        aid,
        layer: layer.to_string(),
        op: op.to_string(),
        attributes,
        error,
        parents,
    })
}

fn parse_seconds(tok: &str) -> Result<u64, LineError> {
    let (whole, frac) = tok
        .split_once('.')
        .ok_or_else(|| bad("timestamp must have decimals"))?;
    if frac.len() != 7 || !frac.bytes().all(|b| b.is_ascii_digit()) {
        return Err(bad("timestamp must have exactly seven decimals"));
    }
    let whole: u64 = whole
        .parse()
        .map_err(|_| bad(format!("bad timestamp {tok:?}")))?;
    let frac: u64 = frac.parse().unwrap();
    whole
        .checked_mul(NS_PER_SEC)
        .and_then(|ns| ns.checked_add(frac * 100))
        .ok_or_else(|| bad("timestamp out of range"))
}

fn parse_id(tok: &str) -> Result<ActivityId, LineError> {
    let body = tok
        .strip_prefix("ID")
        .ok_or_else(|| bad(format!("bad id {tok:?}")))?;
    let (pid, seq) = body
        .split_once('.')
        .ok_or_else(|| bad(format!("bad id {tok:?}")))?;
    Ok(ActivityId::new(
        pid.parse().map_err(|_| bad(format!("bad id {tok:?}")))?,
        seq.parse().map_err(|_| bad(format!("bad id {tok:?}")))?,
    ))
}

/// Byte index of the `)` closing the attribute list, quote-aware.
fn find_close(s: &str) -> Option<usize> {
    let mut in_str = false;
    let mut escaped = false;
    for (i, c) in s.char_indices() {
        if in_str {
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_str = false;
            }
        } else if c == '"' {
            in_str = true;
        } else if c == ')' {
            return Some(i);
        }
    }
    None
}

fn parse_attrs(args: &str) -> Result<Vec<(String, AttrValue)>, LineError> {
    let mut out = Vec::new();
    if args.is_empty() {
        return Ok(out);
    }
    for part in split_top_level(args) {
        let (name, value) = part
            .split_once('=')
            .ok_or_else(|| bad(format!("attribute without value: {part:?}")))?;
        out.push((name.to_string(), parse_value(value)?));
    }
    Ok(out)
}

fn split_top_level(s: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut start = 0;
    let mut in_str = false;
    let mut escaped = false;
    for (i, c) in s.char_indices() {
        if in_str {
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_str = false;
            }
        } else if c == '"' {
            in_str = true;
        } else if c == ',' {
            parts.push(&s[start..i]);
            start = i + 1;
        }
    }
    parts.push(&s[start..]);
    parts
}

fn parse_value(tok: &str) -> Result<AttrValue, LineError> {
    if let Some(body) = tok.strip_prefix('"') {
        let body = body
            .strip_suffix('"')
            .ok_or_else(|| bad(format!("unterminated string {tok:?}")))?;
        let mut s = String::with_capacity(body.len());
        let mut chars = body.chars();
        while let Some(c) = chars.next() {
            if c != '\\' {
                s.push(c);
                continue;
            }
            match chars.next() {
                Some('"') => s.push('"'),
                Some('\\') => s.push('\\'),
                Some('n') => s.push('\n'),
                Some('t') => s.push('\t'),
                Some('r') => s.push('\r'),
                other => return Err(bad(format!("bad escape {other:?}"))),
            }
        }
        return Ok(AttrValue::Str(s));
    }
    if let Ok(v) = tok.parse::<u64>() {
        return Ok(AttrValue::Uint64(v));
    }
    if let Ok(v) = tok.parse::<i64>() {
        return Ok(AttrValue::Int64(v));
    }
    if let Ok(v) = tok.parse::<f64>() {
        if v.is_finite() {
            return Ok(AttrValue::Float64(v));
        }
    }
    Err(bad(format!("bad value {tok:?}")))
}
