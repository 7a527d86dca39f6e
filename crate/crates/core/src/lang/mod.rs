//! Lazy ingestion of foreign trace formats and a small translation language.
//!
//! A [`RecordCursor`] indexes a source file into records up front but parses
//! individual fields only when asked, so translation programs that touch two
//! of eight columns pay for two. A [`SexprProgram`] maps source fields into
//! named output fields, and [`translate`] turns those into unified activities
//! via a [`TargetMapping`]. Records that fail to evaluate land in a reject
//! list with reasons; translation never drops a record silently.

mod cursor;
mod sexpr;
mod translate;

pub use cursor::RecordCursor;
pub use sexpr::{parse_program, Expr, ExprKind, Pos, SexprProgram};
pub use translate::{
    ingest_strace, strace_mapping, strace_program, translate, AttrBinding, Reject, TargetMapping,
    Translation,
};

use thiserror::Error;

use crate::model::ModelError;

#[derive(Debug, Error)]
pub enum LangError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("record {0}: {1}")]
    MalformedRecord(usize, String),
    #[error("record index {index} out of range ({count} records)")]
    IndexOutOfRange { index: usize, count: usize },
    #[error("unbalanced parentheses at line {line}, column {col}")]
    UnbalancedParens { line: usize, col: usize },
    #[error("unknown primitive {name:?} at line {line}, column {col}")]
    UnknownPrimitive {
        name: String,
        line: usize,
        col: usize,
    },
    #[error("duplicate field {0:?}")]
    DuplicateField(String),
    #[error("program root must be (record ...)")]
    NonRecordRoot,
    #[error("bad form at line {line}, column {col}: {what}")]
    BadForm {
        what: String,
        line: usize,
        col: usize,
    },
    #[error("record {record}: eval failed at line {line}, column {col}: {cause}")]
    Eval {
        record: usize,
        line: usize,
        col: usize,
        cause: String,
    },
    #[error("record {record}: no prior activity matches parent key {field:?}")]
    UnresolvedParent { record: usize, field: String },
    #[error("bad target mapping: {0}")]
    BadMapping(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// How a source file is segmented into records.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SourceFormat {
    /// Delimiter-separated rows; quoted fields may contain the delimiter.
    /// With `header`, the first row names the columns; otherwise columns are
    /// addressed as `c0`, `c1`, ...
    Csv { delimiter: u8, header: bool },
    /// One JSON object per line; blank lines are skipped.
    JsonLines,
    /// `<float-seconds> <name>(<args>) = <int>` lines with pseudo-fields
    /// `ts`, `name`, `arg0`.., `ret`.
    StraceText,
}

impl SourceFormat {
    pub fn csv() -> Self {
        SourceFormat::Csv {
            delimiter: b',',
            header: true,
        }
    }
}

/// One lazily parsed field of one record.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldValue {
    Int64(i64),
    Uint64(u64),
    Float64(f64),
    Str(String),
    /// The record has no such field. Not an error.
    Missing,
}

/// Opens a source file and builds its record-boundary index.
pub fn open_source(
    path: impl AsRef<std::path::Path>,
    format: SourceFormat,
) -> Result<RecordCursor, LangError> {
    let text = std::fs::read_to_string(path)?;
    RecordCursor::from_text(text, format)
}
