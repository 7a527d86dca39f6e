//! Record-boundary indexing with lazy per-field parsing.

use std::cell::Cell;
use std::ops::Range;

use super::{FieldValue, LangError, SourceFormat};

/// A source file split into records, with fields parsed on demand.
///
/// Opening scans once for record boundaries (and, for CSV, column counts);
/// no field value is materialized until [`get_field`] asks for it. The
/// number of materialized fields is counted, which makes the laziness
/// contract observable in tests.
///
/// Cursors are single-threaded by design and not `Sync`.
///
/// [`get_field`]: RecordCursor::get_field
#[derive(Debug)]
pub struct RecordCursor {
    text: String,
    format: SourceFormat,
    records: Vec<Range<usize>>,
    /// CSV column names; `c0..` when the file has no header row.
    columns: Vec<String>,
    fields_parsed: Cell<u64>,
}

impl RecordCursor {
    /// Builds the record index over `text`.
    pub fn from_text(text: String, format: SourceFormat) -> Result<Self, LangError> {
        let mut cursor = RecordCursor {
            text,
            format,
            records: Vec::new(),
            columns: Vec::new(),
            fields_parsed: Cell::new(0),
        };
        match cursor.format.clone() {
            SourceFormat::Csv { delimiter, header } => cursor.index_csv(delimiter, header)?,
            SourceFormat::JsonLines => cursor.index_jsonl()?,
            SourceFormat::StraceText => cursor.index_lines(),
        }
        Ok(cursor)
    }

    pub fn record_count(&self) -> usize {
        self.records.len()
    }

    /// Total fields materialized so far, across all records.
    pub fn fields_parsed(&self) -> u64 {
        self.fields_parsed.get()
    }

    /// Raw bytes of one record, without its line terminator.
    pub fn record_text(&self, index: usize) -> Result<&str, LangError> {
        let span = self.records.get(index).ok_or(LangError::IndexOutOfRange {
            index,
            count: self.records.len(),
        })?;
        Ok(&self.text[span.clone()])
    }

    /// Parses one field of one record. Absent fields are `Missing`, not an
    /// error; a record whose bytes violate the format fails here, when it is
    /// first touched.
    pub fn get_field(&self, index: usize, field: &str) -> Result<FieldValue, LangError> {
        let record = self.record_text(index)?;
        let value = match &self.format {
            SourceFormat::Csv { delimiter, .. } => self.csv_field(record, *delimiter, field),
            SourceFormat::JsonLines => self.json_field(index, record, field)?,
            SourceFormat::StraceText => self.strace_field(index, record, field)?,
        };
        if !matches!(value, FieldValue::Missing) {
            self.fields_parsed.set(self.fields_parsed.get() + 1);
        }
        Ok(value)
    }

    fn index_lines(&mut self) {
        let mut start = 0;
        let bytes = self.text.as_bytes();
        for i in 0..=bytes.len() {
            if i == bytes.len() || bytes[i] == b'\n' {
                let mut end = i;
                if end > start && bytes[end - 1] == b'\r' {
                    end -= 1;
                }
                if self.text[start..end].trim().is_empty() {
                    start = i + 1;
                    continue;
                }
                self.records.push(start..end);
                start = i + 1;
            }
        }
    }

    fn index_csv(&mut self, delimiter: u8, header: bool) -> Result<(), LangError> {
        self.index_lines();
        let mut rows = std::mem::take(&mut self.records);

        if header {
            if rows.is_empty() {
                return Ok(());
            }
            let head = rows.remove(0);
            self.columns = split_csv(&self.text[head], delimiter)
                .map_err(|e| LangError::MalformedRecord(0, format!("header: {e}")))?
                .iter()
                .map(|r| unquote_csv(&self.text[r.clone()]))
                .collect();
        }

        for (i, row) in rows.iter().enumerate() {
            let cols = count_csv_columns(&self.text[row.clone()], delimiter)
                .map_err(|e| LangError::MalformedRecord(i, e))?;
            if self.columns.is_empty() {
                self.columns = (0..cols).map(|c| format!("c{c}")).collect();
            }
            if cols != self.columns.len() {
                return Err(LangError::MalformedRecord(
                    i,
                    format!("expected {} columns, found {cols}", self.columns.len()),
                ));
            }
        }
        self.records = rows;
        Ok(())
    }

    fn index_jsonl(&mut self) -> Result<(), LangError> {
        self.index_lines();
        for (i, span) in self.records.iter().enumerate() {
            if !self.text[span.clone()].trim_start().starts_with('{') {
                return Err(LangError::MalformedRecord(
                    i,
                    "line is not a JSON object".into(),
                ));
            }
        }
        Ok(())
    }

    fn csv_field(&self, record: &str, delimiter: u8, field: &str) -> FieldValue {
        let Some(col) = self.columns.iter().position(|c| c == field) else {
            return FieldValue::Missing;
        };
        // Column counts were validated at open, so the split cannot fail and
        // the column exists.
        let spans = split_csv(record, delimiter).expect("validated at open");
        FieldValue::Str(unquote_csv(&record[spans[col].clone()]))
    }

    fn json_field(
        &self,
        index: usize,
        record: &str,
        field: &str,
    ) -> Result<FieldValue, LangError> {
        json_scan_field(record, field)
            .map_err(|e| LangError::MalformedRecord(index, format!("bad JSON: {e}")))
    }

    fn strace_field(
        &self,
        index: usize,
        record: &str,
        field: &str,
    ) -> Result<FieldValue, LangError> {
        let bad = |what: &str| LangError::MalformedRecord(index, what.to_string());

        let (ts, rest) = record
            .trim_start()
            .split_once(' ')
            .ok_or_else(|| bad("missing timestamp"))?;
        if ts.parse::<f64>().is_err() {
            return Err(bad("timestamp is not a number"));
        }
        if field == "ts" {
            return Ok(FieldValue::Str(ts.to_string()));
        }

        let paren = rest.find('(').ok_or_else(|| bad("missing ("))?;
        let name = rest[..paren].trim();
        if name.is_empty() {
            return Err(bad("missing call name"));
        }
        if field == "name" {
            return Ok(FieldValue::Str(name.to_string()));
        }

        let args_text = &rest[paren + 1..];
        let close = find_close_paren(args_text).ok_or_else(|| bad("missing )"))?;

        if field == "ret" {
            let tail = args_text[close + 1..].trim();
            let ret = tail.strip_prefix('=').ok_or_else(|| bad("missing ="))?.trim();
            if ret.parse::<i64>().is_err() {
                return Err(bad("return value is not an integer"));
            }
            return Ok(FieldValue::Str(ret.to_string()));
        }

        if let Some(n) = field.strip_prefix("arg") {
            let Ok(n) = n.parse::<usize>() else {
                return Ok(FieldValue::Missing);
            };
            let args = &args_text[..close];
            if args.trim().is_empty() {
                return Ok(FieldValue::Missing);
            }
            let parts = split_args(args);
            return Ok(match parts.get(n) {
                Some(arg) => FieldValue::Str(unquote_strace(arg.trim()).map_err(|e| bad(&e))?),
                None => FieldValue::Missing,
            });
        }
        Ok(FieldValue::Missing)
    }
}

/// Splits one CSV record into field byte ranges, honoring quotes.
fn split_csv(record: &str, delimiter: u8) -> Result<Vec<Range<usize>>, String> {
    let bytes = record.as_bytes();
    let mut spans = Vec::new();
    let mut start = 0;
    let mut i = 0;
    let mut in_quotes = false;
    while i < bytes.len() {
        let b = bytes[i];
        if in_quotes {
            if b == b'"' {
                if bytes.get(i + 1) == Some(&b'"') {
                    i += 2;
                    continue;
                }
                in_quotes = false;
            }
        } else if b == b'"' {
            in_quotes = true;
        } else if b == delimiter {
            spans.push(start..i);
            start = i + 1;
        }
        i += 1;
    }
    if in_quotes {
        return Err("unterminated quote".into());
    }
    spans.push(start..bytes.len());
    Ok(spans)
}

fn count_csv_columns(record: &str, delimiter: u8) -> Result<usize, String> {
    split_csv(record, delimiter).map(|s| s.len())
}

fn unquote_csv(field: &str) -> String {
    let trimmed = field.trim();
    if let Some(inner) = trimmed
        .strip_prefix('"')
        .and_then(|s| s.strip_suffix('"'))
    {
        inner.replace("\"\"", "\"")
    } else {
        field.to_string()
    }
}

/// Minimal lazy scan of one top-level JSON object for a single key: values of
/// other keys are skipped structurally, never materialized.
fn json_scan_field(record: &str, field: &str) -> Result<FieldValue, String> {
    let s = record.trim();
    let inner = s
        .strip_prefix('{')
        .and_then(|s| s.strip_suffix('}'))
        .ok_or("not an object")?;
    let bytes = inner.as_bytes();
    let mut i = 0;
    loop {
        skip_ws(bytes, &mut i);
        if i >= bytes.len() {
            return Ok(FieldValue::Missing);
        }
        let key = parse_json_string(bytes, &mut i)?;
        skip_ws(bytes, &mut i);
        if bytes.get(i) != Some(&b':') {
            return Err("expected ':'".into());
        }
        i += 1;
        skip_ws(bytes, &mut i);
        if key == field {
            return parse_json_value(bytes, &mut i);
        }
        skip_json_value(bytes, &mut i)?;
        skip_ws(bytes, &mut i);
        match bytes.get(i) {
            Some(b',') => i += 1,
            None => return Ok(FieldValue::Missing),
            _ => return Err("expected ','".into()),
        }
    }
}

fn skip_ws(bytes: &[u8], i: &mut usize) {
    while *i < bytes.len() && bytes[*i].is_ascii_whitespace() {
        *i += 1;
    }
}

fn parse_json_string(bytes: &[u8], i: &mut usize) -> Result<String, String> {
    if bytes.get(*i) != Some(&b'"') {
        return Err("expected string".into());
    }
    *i += 1;
    let mut out = String::new();
    while *i < bytes.len() {
        match bytes[*i] {
            b'"' => {
                *i += 1;
                return Ok(out);
            }
            b'\\' => {
                *i += 1;
                let c = bytes.get(*i).ok_or("bad escape")?;
                out.push(match c {
                    b'"' => '"',
                    b'\\' => '\\',
                    b'/' => '/',
                    b'n' => '\n',
                    b't' => '\t',
                    b'r' => '\r',
                    _ => return Err("unsupported escape".into()),
                });
                *i += 1;
            }
            b => {
                // multi-byte UTF-8 sequences pass through untouched
                let s = &bytes[*i..];
                let ch_len = utf8_len(b);
                out.push_str(std::str::from_utf8(&s[..ch_len]).map_err(|_| "bad UTF-8")?);
                *i += ch_len;
            }
        }
    }
    Err("unterminated string".into())
}

fn utf8_len(b: u8) -> usize {
    match b {
        0x00..=0x7f => 1,
        0xc0..=0xdf => 2,
        0xe0..=0xef => 3,
        _ => 4,
    }
}

fn parse_json_value(bytes: &[u8], i: &mut usize) -> Result<FieldValue, String> {
    match bytes.get(*i) {
        Some(b'"') => Ok(FieldValue::Str(parse_json_string(bytes, i)?)),
        Some(b't') => {
            expect_token(bytes, i, "true")?;
            Ok(FieldValue::Int64(1))
        }
        Some(b'f') => {
            expect_token(bytes, i, "false")?;
            Ok(FieldValue::Int64(0))
        }
        Some(b'n') => {
            expect_token(bytes, i, "null")?;
            Ok(FieldValue::Missing)
        }
        Some(b'{') | Some(b'[') => Err("nested values are not addressable".into()),
        Some(_) => {
            let start = *i;
            while *i < bytes.len() && !matches!(bytes[*i], b',' | b'}' | b']') {
                *i += 1;
            }
            let tok = std::str::from_utf8(&bytes[start..*i])
                .map_err(|_| "bad UTF-8")?
                .trim();
            if let Ok(v) = tok.parse::<i64>() {
                return Ok(FieldValue::Int64(v));
            }
            if let Ok(v) = tok.parse::<u64>() {
                return Ok(FieldValue::Uint64(v));
            }
            if let Ok(v) = tok.parse::<f64>() {
                if v.is_finite() {
                    return Ok(FieldValue::Float64(v));
                }
            }
            Err(format!("bad number {tok:?}"))
        }
        None => Err("missing value".into()),
    }
}

fn expect_token(bytes: &[u8], i: &mut usize, token: &str) -> Result<(), String> {
    if bytes[*i..].starts_with(token.as_bytes()) {
        *i += token.len();
        Ok(())
    } else {
        Err(format!("expected {token}"))
    }
}

/// Skips one JSON value without building it.
fn skip_json_value(bytes: &[u8], i: &mut usize) -> Result<(), String> {
    match bytes.get(*i) {
        Some(b'"') => {
            parse_json_string(bytes, i)?;
            Ok(())
        }
        Some(b'{') | Some(b'[') => {
            let open = bytes[*i];
            let close = if open == b'{' { b'}' } else { b']' };
            let mut depth = 0usize;
            while *i < bytes.len() {
                match bytes[*i] {
                    b'"' => {
                        parse_json_string(bytes, i)?;
                        continue;
                    }
                    b if b == open => depth += 1,
                    b if b == close => {
                        depth -= 1;
                        if depth == 0 {
                            *i += 1;
                            return Ok(());
                        }
                    }
                    _ => {}
                }
                *i += 1;
            }
            Err("unterminated container".into())
        }
        Some(_) => {
            while *i < bytes.len() && !matches!(bytes[*i], b',' | b'}' | b']') {
                *i += 1;
            }
            Ok(())
        }
        None => Err("missing value".into()),
    }
}

/// Byte index of the `)` that closes the argument list, quote-aware.
fn find_close_paren(s: &str) -> Option<usize> {
    let mut depth = 0usize;
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
        } else {
            match c {
                '"' => in_str = true,
                '(' => depth += 1,
                ')' => {
                    if depth == 0 {
                        return Some(i);
                    }
                    depth -= 1;
                }
                _ => {}
            }
        }
    }
    None
}

/// Splits an argument list on top-level commas, quote- and paren-aware.
fn split_args(s: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut start = 0;
    let mut depth = 0usize;
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
        } else {
            match c {
                '"' => in_str = true,
                '(' => depth += 1,
                ')' => depth = depth.saturating_sub(1),
                ',' if depth == 0 => {
                    parts.push(&s[start..i]);
                    start = i + 1;
                }
                _ => {}
            }
        }
    }
    parts.push(&s[start..]);
    parts
}

fn unquote_strace(arg: &str) -> Result<String, String> {
    let Some(body) = arg.strip_prefix('"') else {
        return Ok(arg.to_string());
    };
    let body = body.strip_suffix('"').ok_or("unterminated string")?;
    let mut out = String::with_capacity(body.len());
    let mut chars = body.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('"') => out.push('"'),
            Some('\\') => out.push('\\'),
            Some('n') => out.push('\n'),
            Some('t') => out.push('\t'),
            Some('r') => out.push('\r'),
            other => return Err(format!("bad escape {other:?}")),
        }
    }
    Ok(out)
}
