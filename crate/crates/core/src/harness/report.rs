//! Versioned CSV output. Every file starts with `# schema=v1`, followed by
//! an optional `# generated_unix=<secs>` line, then a header and rows that
//! all end with the configuration hash.

use std::fs;
use std::path::Path as FsPath;
use std::time::{SystemTime, UNIX_EPOCH};

use crate::error::{Error, Result};

pub const SCHEMA: &str = "# schema=v1";

/// One inequality check `lhs <= rhs` (or `>=`), with signed slack.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckRow {
    pub check_id: String,
    pub instance_id: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub pass: bool,
}

impl CheckRow {
    /// Passes when `lhs <= rhs`.
    pub fn at_most(check_id: &str, instance_id: impl ToString, lhs: f64, rhs: f64) -> Self {
        let slack = rhs - lhs;
        CheckRow { check_id: check_id.into(), instance_id: instance_id.to_string(), lhs, rhs, slack, pass: slack >= 0.0 }
    }

    /// Passes when `lhs >= rhs`.
    pub fn at_least(check_id: &str, instance_id: impl ToString, lhs: f64, rhs: f64) -> Self {
        let slack = lhs - rhs;
        CheckRow { check_id: check_id.into(), instance_id: instance_id.to_string(), lhs, rhs, slack, pass: slack >= 0.0 }
    }
}

/// A header plus string rows.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn from_checks(rows: &[CheckRow]) -> Self {
        let mut t = Table::new(&["check_id", "instance_id", "lhs", "rhs", "slack", "pass"]);
        for r in rows {
            t.push(vec![
                r.check_id.clone(),
                r.instance_id.clone(),
                num(r.lhs),
                num(r.rhs),
                num(r.slack),
                r.pass.to_string(),
            ]);
        }
        t
    }
}

/// Shortest round-trip float formatting.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

pub fn render(table: &Table, config_hash: &str, reproducible: bool) -> Result<String> {
    let mut out = String::new();
    out.push_str(SCHEMA);
    out.push('\n');
    if !reproducible {
        let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        out.push_str(&format!("# generated_unix={secs}\n"));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = table.header.clone();
    header.push("config_hash".into());
    w.write_record(&header).map_err(csv_err)?;
    for row in &table.rows {
        w.write_record(row.iter().map(String::as_str).chain([config_hash])).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    out.push_str(&String::from_utf8(bytes).expect("csv output is utf-8"));
    Ok(out)
}

pub fn write_table(path: &FsPath, table: &Table, config_hash: &str, reproducible: bool) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, render(table, config_hash, reproducible)?)?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}
