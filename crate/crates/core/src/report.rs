//! Emitted file formats.
//!
//! Every file starts with its schema version: CSV files carry a leading
//! `# schema_version = 1` comment line, key-value reports a
//! `schema_version = 1` entry. Readers reject any other version.
//!
//! * Trajectory CSV: `round,f_1,...,f_M,successes,throughput,regenerations`,
//!   one row per round; `throughput` is empty in Bernoulli reward mode.
//! * Comparison CSV: `round,mf_bandit,centralized,random`, one row per round
//!   followed by a `mean` summary row.
//! * Reports: UTF-8 `key = value` lines, `#` comments allowed.

use std::fmt::Display;
use std::io::{self, Write};

use thiserror::Error;

use crate::baselines::{Comparison, ThroughputTrace};
use crate::dynamics::Trajectory;
use crate::model::config_entries;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReportError {
    #[error("missing schema_version")]
    MissingVersion,
    #[error("unsupported schema_version `{0}`")]
    UnknownVersion(String),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("missing column `{0}`")]
    MissingColumn(String),
}

fn malformed(line: usize, message: impl Into<String>) -> ReportError {
    ReportError::Malformed {
        line,
        message: message.into(),
    }
}

fn check_version(value: &str) -> Result<(), ReportError> {
    if value.trim() == SCHEMA_VERSION.to_string() {
        Ok(())
    } else {
        Err(ReportError::UnknownVersion(value.trim().to_string()))
    }
}

/// Ordered key-value report.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct KvReport {
    entries: Vec<(String, String)>,
}

impl KvReport {
    pub fn new(kind: &str) -> Self {
        let mut r = KvReport::default();
        r.push("schema_version", SCHEMA_VERSION);
        r.push("kind", kind);
        r
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl Display) {
        self.entries.push((key.into(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(v);
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, ReportError> {
        let mut r = KvReport::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| malformed(i + 1, "expected `key = value`"))?;
            r.entries.push((k.trim().to_string(), v.trim().to_string()));
        }
        check_version(r.get("schema_version").ok_or(ReportError::MissingVersion)?)?;
        Ok(r)
    }
}

pub fn format_vector(xs: &[f64]) -> String {
    xs.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

fn version_line() -> String {
    format!("# schema_version = {SCHEMA_VERSION}")
}

pub fn trajectory_header(num_sbs: usize) -> String {
    let mut cols = vec!["round".to_string()];
    cols.extend((1..=num_sbs).map(|m| format!("f_{m}")));
    cols.extend(["successes", "throughput", "regenerations"].map(String::from));
    cols.join(",")
}

pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, mut w: W) -> io::Result<()> {
    writeln!(w, "{}", version_line())?;
    writeln!(w, "{}", trajectory_header(traj.cfg.num_sbs))?;
    for r in &traj.rounds {
        let mut line = r.round.to_string();
        for f in &r.profile.fractions {
            line.push(',');
            line.push_str(&f.to_string());
        }
        line.push(',');
        line.push_str(&r.successes.to_string());
        line.push(',');
        if let Some(t) = r.aggregate_throughput {
            line.push_str(&t.to_string());
        }
        line.push(',');
        line.push_str(&r.regenerations.to_string());
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// A parsed CSV: header names and raw cells.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn column(&self, name: &str) -> Result<usize, ReportError> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| ReportError::MissingColumn(name.to_string()))
    }
}

/// Reads a versioned CSV document and checks that `required` columns exist.
pub fn read_csv(text: &str, required: &[&str]) -> Result<CsvTable, ReportError> {
    let mut lines = text.lines().enumerate();
    let (_, first) = lines.next().ok_or(ReportError::MissingVersion)?;
    let version = first
        .strip_prefix('#')
        .and_then(|rest| rest.split_once('='))
        .filter(|(k, _)| k.trim() == "schema_version")
        .map(|(_, v)| v)
        .ok_or(ReportError::MissingVersion)?;
    check_version(version)?;
    let (_, header) = lines.next().ok_or_else(|| malformed(2, "missing header"))?;
    let header: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<String> = line.split(',').map(|s| s.trim().to_string()).collect();
        if cells.len() != header.len() {
            return Err(malformed(
                i + 1,
                format!("expected {} cells, got {}", header.len(), cells.len()),
            ));
        }
        rows.push(cells);
    }
    let table = CsvTable { header, rows };
    for col in required {
        table.column(col)?;
    }
    Ok(table)
}

pub fn read_trajectory_csv(text: &str, num_sbs: usize) -> Result<CsvTable, ReportError> {
    let header = trajectory_header(num_sbs);
    let cols: Vec<&str> = header.split(',').collect();
    read_csv(text, &cols)
}

pub const COMPARISON_HEADER: &str = "round,mf_bandit,centralized,random";

fn write_traces<W: Write>(
    mut w: W,
    mf: &[f64],
    central: &[f64],
    random: &[f64],
) -> io::Result<()> {
    writeln!(w, "{}", version_line())?;
    writeln!(w, "{COMPARISON_HEADER}")?;
    for t in 0..mf.len() {
        writeln!(w, "{},{},{},{}", t + 1, mf[t], central[t], random[t])?;
    }
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    writeln!(w, "mean,{},{},{}", mean(mf), mean(central), mean(random))
}

/// Comparison CSV over all realized rates.
pub fn write_comparison_csv<W: Write>(cmp: &Comparison, w: W) -> io::Result<()> {
    let pick = |t: &ThroughputTrace| t.rate_sum.clone();
    write_traces(w, &pick(&cmp.mf_bandit), &pick(&cmp.centralized), &pick(&cmp.random))
}

/// Comparison CSV counting successful transmissions only.
pub fn write_successful_comparison_csv<W: Write>(cmp: &Comparison, w: W) -> io::Result<()> {
    let pick = |t: &ThroughputTrace| t.successful_rate_sum.clone();
    write_traces(w, &pick(&cmp.mf_bandit), &pick(&cmp.centralized), &pick(&cmp.random))
}

pub fn read_comparison_csv(text: &str) -> Result<CsvTable, ReportError> {
    let cols: Vec<&str> = COMPARISON_HEADER.split(',').collect();
    read_csv(text, &cols)
}

/// Appends the config echo as `config.<key>` entries.
pub fn push_config(report: &mut KvReport, cfg: &crate::model::NetworkConfig) {
    for (k, v) in config_entries(cfg) {
        report.push(format!("config.{k}"), v);
    }
}
