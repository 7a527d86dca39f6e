//! Job-level screening against threshold rules.
//!
//! Consumes per-job I/O counters (one JSON object per line) and flags jobs
//! whose counters cross configured thresholds, e.g. an excessive number of
//! opens or a tiny average I/O size.

use std::fmt;
use std::io::{BufRead, BufReader, Read};
use std::str::FromStr;

use serde::Deserialize;

use super::AnalysisError;

/// Per-job I/O counters, one row per job.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct JobStatsRow {
    #[serde(deserialize_with = "job_id")]
    pub job: String,
    #[serde(default)]
    pub opens: u64,
    #[serde(default)]
    pub reads: u64,
    #[serde(default)]
    pub writes: u64,
    #[serde(default)]
    pub bytes_r: u64,
    #[serde(default)]
    pub bytes_w: u64,
}

/// Job ids may be written as strings or bare numbers.
fn job_id<'de, D: serde::Deserializer<'de>>(d: D) -> Result<String, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Id {
        Text(String),
        Number(u64),
    }
    Ok(match Id::deserialize(d)? {
        Id::Text(s) => s,
        Id::Number(n) => n.to_string(),
    })
}

impl JobStatsRow {
    /// Mean bytes per data operation; zero when the job moved no data ops.
    pub fn avg_io_size(&self) -> f64 {
        let ops = self.reads + self.writes;
        if ops == 0 {
            0.0
        } else {
            (self.bytes_r + self.bytes_w) as f64 / ops as f64
        }
    }

    fn field(&self, f: RuleField) -> f64 {
        match f {
            RuleField::Opens => self.opens as f64,
            RuleField::Reads => self.reads as f64,
            RuleField::Writes => self.writes as f64,
            RuleField::BytesRead => self.bytes_r as f64,
            RuleField::BytesWritten => self.bytes_w as f64,
            RuleField::AvgIoSize => self.avg_io_size(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleField {
    Opens,
    Reads,
    Writes,
    BytesRead,
    BytesWritten,
    AvgIoSize,
}

impl RuleField {
    fn name(self) -> &'static str {
        match self {
            RuleField::Opens => "opens",
            RuleField::Reads => "reads",
            RuleField::Writes => "writes",
            RuleField::BytesRead => "bytes_r",
            RuleField::BytesWritten => "bytes_w",
            RuleField::AvgIoSize => "avg-io-size",
        }
    }
}

impl FromStr for RuleField {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "opens" => RuleField::Opens,
            "reads" => RuleField::Reads,
            "writes" => RuleField::Writes,
            "bytes_r" => RuleField::BytesRead,
            "bytes_w" => RuleField::BytesWritten,
            "avg-io-size" | "avg_io_size" => RuleField::AvgIoSize,
            other => return Err(format!("unknown field {other:?}")),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleOp {
    Lt,
    Gt,
    Le,
    Ge,
}

impl RuleOp {
    fn apply(self, lhs: f64, rhs: f64) -> bool {
        match self {
            RuleOp::Lt => lhs < rhs,
            RuleOp::Gt => lhs > rhs,
            RuleOp::Le => lhs <= rhs,
            RuleOp::Ge => lhs >= rhs,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            RuleOp::Lt => "<",
            RuleOp::Gt => ">",
            RuleOp::Le => "<=",
            RuleOp::Ge => ">=",
        }
    }
}

impl FromStr for RuleOp {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "<" => RuleOp::Lt,
            ">" => RuleOp::Gt,
            "<=" => RuleOp::Le,
            ">=" => RuleOp::Ge,
            other => return Err(format!("unknown comparator {other:?}")),
        })
    }
}

/// One screening rule: `field comparator threshold`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScreeningRule {
    pub field: RuleField,
    pub op: RuleOp,
    pub threshold: f64,
}

impl ScreeningRule {
    pub fn matches(&self, row: &JobStatsRow) -> bool {
        self.op.apply(row.field(self.field), self.threshold)
    }
}

impl fmt::Display for ScreeningRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.field.name(), self.op.symbol(), self.threshold)
    }
}

impl FromStr for ScreeningRule {
    type Err = AnalysisError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |reason: String| AnalysisError::BadRule {
            rule: s.to_string(),
            reason,
        };
        let parts: Vec<&str> = s.split_whitespace().collect();
        let [field, op, threshold] = parts[..] else {
            return Err(bad(format!("expected 3 tokens, found {}", parts.len())));
        };
        let threshold: f64 = threshold
            .parse()
            .map_err(|e| bad(format!("bad threshold: {e}")))?;
        if !threshold.is_finite() {
            return Err(bad("threshold must be finite".into()));
        }
        Ok(ScreeningRule {
            field: field.parse().map_err(bad)?,
            op: op.parse().map_err(bad)?,
            threshold,
        })
    }
}

/// Parses one rule per non-empty line; `#` starts a comment line.
pub fn parse_rules(text: &str) -> Result<Vec<ScreeningRule>, AnalysisError> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(ScreeningRule::from_str)
        .collect()
}

/// Reads jobstats rows, one JSON object per line.
pub fn read_jobstats<R: Read>(reader: R) -> Result<Vec<JobStatsRow>, AnalysisError> {
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = serde_json::from_str(&line).map_err(|e| AnalysisError::BadJobStats {
            line: i + 1,
            reason: e.to_string(),
        })?;
        rows.push(row);
    }
    Ok(rows)
}

/// A job that crossed at least one threshold, with every rule it matched.
#[derive(Debug, Clone, PartialEq)]
pub struct FlaggedJob {
    pub job: String,
    pub rules: Vec<String>,
}

/// Flags every job matching any rule; output sorted by job id, each flag
/// names all rules the job matched.
pub fn screen_jobs(rows: &[JobStatsRow], rules: &[ScreeningRule]) -> Vec<FlaggedJob> {
    let mut flagged: Vec<FlaggedJob> = rows
        .iter()
        .filter_map(|row| {
            let matched: Vec<String> = rules
                .iter()
                .filter(|r| r.matches(row))
                .map(ScreeningRule::to_string)
                .collect();
            (!matched.is_empty()).then(|| FlaggedJob {
                job: row.job.clone(),
                rules: matched,
            })
        })
        .collect();
    flagged.sort_by(|a, b| a.job.cmp(&b.job));
    flagged
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(job: &str, opens: u64, reads: u64, writes: u64, bytes_r: u64, bytes_w: u64) -> JobStatsRow {
        JobStatsRow {
            job: job.to_string(),
            opens,
            reads,
            writes,
            bytes_r,
            bytes_w,
        }
    }

    #[test]
    fn excessive_opens_are_flagged() {
        let rules = parse_rules("opens > 5000000").unwrap();
        let flagged = screen_jobs(&[row("j1", 6_000_000, 0, 0, 0, 0)], &rules);
        assert_eq!(flagged.len(), 1);
        assert_eq!(flagged[0].job, "j1");
        assert_eq!(flagged[0].rules, vec!["opens > 5000000"]);
    }

    #[test]
    fn the_boundary_is_strict() {
        let rules = parse_rules("opens > 5000000").unwrap();
        let flagged = screen_jobs(&[row("j1", 5_000_000, 0, 0, 0, 0)], &rules);
        assert!(flagged.is_empty());
    }

    #[test]
    fn tiny_average_io_is_flagged() {
        let rules = parse_rules("avg-io-size < 4096").unwrap();
        let flagged = screen_jobs(&[row("j", 1, 0, 1_000_000, 0, 1_000_000)], &rules);
        assert_eq!(flagged.len(), 1, "1 byte per write");
    }

    #[test]
    fn zero_ops_guard_yields_zero_average() {
        assert_eq!(row("j", 5, 0, 0, 0, 0).avg_io_size(), 0.0);
    }

    #[test]
    fn every_matching_rule_is_named() {
        let rules = parse_rules("opens > 10\navg-io-size < 4096\nreads >= 1000000").unwrap();
        let flagged = screen_jobs(&[row("j", 100, 2_000_000, 0, 2_000_000, 0)], &rules);
        assert_eq!(
            flagged[0].rules,
            vec!["opens > 10", "avg-io-size < 4096", "reads >= 1000000"]
        );
    }

    #[test]
    fn output_is_sorted_by_job_id() {
        let rules = parse_rules("opens >= 0").unwrap();
        let rows = vec![
            row("zeta", 1, 0, 0, 0, 0),
            row("alpha", 1, 0, 0, 0, 0),
            row("mid", 1, 0, 0, 0, 0),
        ];
        let flagged = screen_jobs(&rows, &rules);
        let ids: Vec<&str> = flagged.iter().map(|f| f.job.as_str()).collect();
        assert_eq!(ids, vec!["alpha", "mid", "zeta"]);
    }

    #[test]
    fn jobstats_accept_numeric_and_text_ids() {
        let text = r#"{"job": 42, "opens": 1, "reads": 2, "writes": 3, "bytes_r": 10, "bytes_w": 20}
{"job": "analysis-7", "opens": 9}
"#;
        let rows = read_jobstats(text.as_bytes()).unwrap();
        assert_eq!(rows[0].job, "42");
        assert_eq!(rows[0].avg_io_size(), 6.0);
        assert_eq!(rows[1].job, "analysis-7");
        assert_eq!(rows[1].opens, 9);
        assert_eq!(rows[1].reads, 0);
    }

    #[test]
    fn malformed_rules_are_rejected() {
        assert!(parse_rules("opens >").is_err());
        assert!(parse_rules("opens ~ 5").is_err());
        assert!(parse_rules("frobs > 5").is_err());
        assert!(parse_rules("opens > banana").is_err());
        assert!(parse_rules("# comment\n\nopens > 5").unwrap().len() == 1);
    }

    #[test]
    fn bad_jobstats_lines_name_the_line() {
        let text = "{\"job\": \"a\"}\nnot json\n";
        match read_jobstats(text.as_bytes()) {
            Err(AnalysisError::BadJobStats { line: 2, .. }) => {}
            other => panic!("unexpected: {other:?}"),
        }
    }
}
