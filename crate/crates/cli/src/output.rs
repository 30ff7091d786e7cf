//! Result files: `results.json`, `manifest.json` and CSV tables.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    F(f64),
    I(i64),
    S(String),
    B(bool),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::F(v)
    }
}
impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::I(v as i64)
    }
}
impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::I(v)
    }
}
impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::B(v)
    }
}
impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::S(v.to_string())
    }
}
impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::S(v)
    }
}

/// Seventeen significant digits, so values round-trip.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:.16e}")
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::F(v) => format_float(*v),
            Cell::I(v) => v.to_string(),
            Cell::S(s) => s.clone(),
            Cell::B(b) => b.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// File name without extension.
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: impl Into<String>, header: &[&str]) -> Self {
        Self {
            name: name.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// RFC 4180 CSV with LF line endings.
    pub fn to_csv(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let io = |e: csv::Error| CliError::Io(std::io::Error::other(e.to_string()));
        w.write_record(&self.header).map_err(io)?;
        for r in &self.rows {
            w.write_record(r.iter().map(Cell::render)).map_err(io)?;
        }
        w.into_inner()
            .map_err(|e| CliError::Io(std::io::Error::other(e.to_string())))
    }
}

/// Everything an operation produces besides its exit status.
#[derive(Debug, Clone, Default)]
pub struct Artifacts {
    pub results: serde_json::Value,
    pub tables: Vec<Table>,
    /// Extra binary files (name, bytes).
    pub blobs: Vec<(String, Vec<u8>)>,
}

#[derive(Serialize)]
struct ResultsFile<'a> {
    name: &'a str,
    op: &'a str,
    status: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    failure: Option<&'a crate::FailureRecord>,
    #[serde(skip_serializing_if = "serde_json::Value::is_null")]
    result: &'a serde_json::Value,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'a str,
    version: &'a str,
    scenario: &'a crate::Scenario,
    tolerances: serde_json::Value,
    files: Vec<String>,
}

fn write(dir: &Path, name: &str, bytes: &[u8], files: &mut Vec<String>) -> Result<(), CliError> {
    fs::write(dir.join(name), bytes)?;
    files.push(name.to_string());
    Ok(())
}

/// Writes `results.json`, the CSV tables, the blobs and `manifest.json`.
pub fn write_artifacts(
    dir: &Path,
    scenario: &crate::Scenario,
    outcome: &Result<Artifacts, CliError>,
    tol_scale: f64,
) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    let failure = outcome.as_ref().err().map(crate::FailureRecord::from);
    let null = serde_json::Value::Null;
    let (status, result) = match outcome {
        Ok(a) => ("ok", &a.results),
        Err(e) if e.exit_code() == crate::EXIT_NUMERICAL => ("numerical_failure", &null),
        Err(_) => ("validation_failure", &null),
    };
    let res = ResultsFile {
        name: &scenario.name,
        op: scenario.task.op(),
        status,
        failure: failure.as_ref(),
        result,
    };
    let mut text = serde_json::to_string_pretty(&res).map_err(trgeo::Error::from)?;
    text.push('\n');
    write(dir, "results.json", text.as_bytes(), &mut files)?;
    if let Ok(a) = outcome {
        for t in &a.tables {
            write(dir, &format!("{}.csv", t.name), &t.to_csv()?, &mut files)?;
        }
        for (name, bytes) in &a.blobs {
            write(dir, name, bytes, &mut files)?;
        }
    }
    let manifest = Manifest {
        tool: "trgeo",
        version: env!("CARGO_PKG_VERSION"),
        scenario,
        tolerances: crate::run::tolerances(tol_scale),
        files: files.clone(),
    };
    let mut text = serde_json::to_string_pretty(&manifest).map_err(trgeo::Error::from)?;
    text.push('\n');
    write(dir, "manifest.json", text.as_bytes(), &mut files)?;
    Ok(files.iter().map(|f| dir.join(f)).collect())
}
