//! Line-oriented text format for rough paths.
//!
//! ```text
//! roughpath v1 dim=<d> steps=<N> T=<float> alpha=<float>
//! meta key=value ...            (optional)
//! <N+1 lines of d floats>       first level
//! <N lines of d*d floats>       step areas, row-major
//! table                         (optional)
//! <i> <j> <d*d floats>          one line per pair i < j
//! ```
//!
//! Floats are printed in shortest round-trip form, so reading back a written
//! file reproduces every value bit for bit.

use std::io::{BufRead, Write};

use super::path::{Grid, Path};
use super::rough_path::RoughPath;
use super::table::PairTable;
use crate::error::{Error, Result};

/// Free-form `key=value` metadata carried by driver files.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DriverMeta {
    pub entries: Vec<(String, String)>,
}

impl DriverMeta {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn insert(&mut self, key: impl Into<String>, value: impl ToString) {
        self.entries.push((key.into(), value.to_string()));
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoughPathFile {
    pub rough: RoughPath,
    pub meta: Option<DriverMeta>,
    pub table: Option<PairTable>,
}

pub(crate) fn write_row<W: Write>(w: &mut W, values: &[f64]) -> Result<()> {
    let mut first = true;
    for v in values {
        if !first {
            w.write_all(b" ")?;
        }
        write!(w, "{v:?}")?;
        first = false;
    }
    w.write_all(b"\n")?;
    Ok(())
}

pub fn write_rough_path<W: Write>(
    w: &mut W,
    rough: &RoughPath,
    meta: Option<&DriverMeta>,
    table: Option<&PairTable>,
) -> Result<()> {
    let g = rough.grid();
    writeln!(
        w,
        "roughpath v1 dim={} steps={} T={:?} alpha={:?}",
        rough.dim(),
        g.n_steps(),
        g.horizon(),
        rough.alpha()
    )?;
    if let Some(m) = meta {
        write!(w, "meta")?;
        for (k, v) in &m.entries {
            write!(w, " {k}={v}")?;
        }
        writeln!(w)?;
    }
    for i in 0..g.n_points() {
        write_row(w, rough.first_level().at(i))?;
    }
    for k in 0..g.n_steps() {
        write_row(w, rough.step_area(k))?;
    }
    if let Some(t) = table {
        writeln!(w, "table")?;
        for i in 0..t.n_points() {
            for j in i + 1..t.n_points() {
                write!(w, "{i} {j} ")?;
                write_row(w, t.get(i, j)?)?;
            }
        }
    }
    Ok(())
}

/// Line source that tracks 1-based line numbers for error reporting.
pub(crate) struct Lines<R> {
    inner: std::io::Lines<R>,
    pub line_no: usize,
    peeked: Option<String>,
}

impl<R: BufRead> Lines<R> {
    pub fn new(r: R) -> Self {
        Self {
            inner: r.lines(),
            line_no: 0,
            peeked: None,
        }
    }

    pub fn next_line(&mut self) -> Result<Option<String>> {
        if let Some(l) = self.peeked.take() {
            self.line_no += 1;
            return Ok(Some(l));
        }
        loop {
            match self.inner.next() {
                None => return Ok(None),
                Some(l) => {
                    let l = l?;
                    if l.trim().is_empty() {
                        self.line_no += 1;
                        continue;
                    }
                    self.line_no += 1;
                    return Ok(Some(l));
                }
            }
        }
    }

    pub fn expect_line(&mut self, what: &str) -> Result<String> {
        self.next_line()?
            .ok_or_else(|| Error::parse(self.line_no + 1, format!("unexpected end of file, expected {what}")))
    }

    pub fn peek(&mut self) -> Result<Option<&str>> {
        if self.peeked.is_none() {
            loop {
                match self.inner.next() {
                    None => return Ok(None),
                    Some(l) => {
                        let l = l?;
                        if l.trim().is_empty() {
                            self.line_no += 1;
                            continue;
                        }
                        self.peeked = Some(l);
                        break;
                    }
                }
            }
        }
        Ok(self.peeked.as_deref())
    }

    pub fn floats(&mut self, expected: usize, what: &str) -> Result<Vec<f64>> {
        let line = self.expect_line(what)?;
        parse_floats(&line, expected, self.line_no)
    }
}

pub(crate) fn parse_floats(line: &str, expected: usize, line_no: usize) -> Result<Vec<f64>> {
    let vals: std::result::Result<Vec<f64>, _> =
        line.split_whitespace().map(str::parse::<f64>).collect();
    let vals = vals.map_err(|e| Error::parse(line_no, format!("bad float: {e}")))?;
    if vals.len() != expected {
        return Err(Error::parse(
            line_no,
            format!("expected {expected} values, found {}", vals.len()),
        ));
    }
    Ok(vals)
}

/// Parses `key=value` tokens after a fixed leading keyword list.
pub(crate) fn header_fields<'a>(
    line: &'a str,
    keywords: &[&str],
    line_no: usize,
) -> Result<Vec<(&'a str, &'a str)>> {
    let mut tokens = line.split_whitespace();
    for kw in keywords {
        match tokens.next() {
            Some(t) if t == *kw => {}
            other => {
                return Err(Error::parse(
                    line_no,
                    format!("expected `{kw}`, found {:?}", other.unwrap_or("")),
                ))
            }
        }
    }
    tokens
        .map(|t| {
            t.split_once('=')
                .ok_or_else(|| Error::parse(line_no, format!("expected key=value, found `{t}`")))
        })
        .collect()
}

pub(crate) fn field<T: std::str::FromStr>(
    fields: &[(&str, &str)],
    key: &str,
    line_no: usize,
) -> Result<T> {
    let raw = fields
        .iter()
        .find(|(k, _)| *k == key)
        .map(|(_, v)| *v)
        .ok_or_else(|| Error::parse(line_no, format!("missing `{key}`")))?;
    raw.parse()
        .map_err(|_| Error::parse(line_no, format!("invalid value `{raw}` for `{key}`")))
}

pub fn read_rough_path<R: BufRead>(r: R) -> Result<RoughPathFile> {
    let mut lines = Lines::new(r);
    read_rough_path_from(&mut lines)
}

pub(crate) fn read_rough_path_from<R: BufRead>(lines: &mut Lines<R>) -> Result<RoughPathFile> {
    let header = lines.expect_line("roughpath header")?;
    let ln = lines.line_no;
    let fields = header_fields(&header, &["roughpath", "v1"], ln)?;
    let dim: usize = field(&fields, "dim", ln)?;
    let steps: usize = field(&fields, "steps", ln)?;
    let horizon: f64 = field(&fields, "T", ln)?;
    let alpha: f64 = field(&fields, "alpha", ln)?;
    let grid = Grid::new(horizon, steps).map_err(|e| Error::parse(ln, e.to_string()))?;

    let mut meta = None;
    if let Some(l) = lines.peek()? {
        if l.starts_with("meta") {
            let l = lines.expect_line("meta")?;
            let f = header_fields(&l, &["meta"], lines.line_no)?;
            meta = Some(DriverMeta {
                entries: f
                    .into_iter()
                    .map(|(k, v)| (k.to_string(), v.to_string()))
                    .collect(),
            });
        }
    }

    let mut first = Vec::with_capacity(grid.n_points() * dim);
    for _ in 0..grid.n_points() {
        first.extend(lines.floats(dim, "first level values")?);
    }
    let mut areas = Vec::with_capacity(steps * dim * dim);
    for _ in 0..steps {
        areas.extend(lines.floats(dim * dim, "step area values")?);
    }
    let path = Path::new(grid, dim, first).map_err(|e| Error::parse(lines.line_no, e.to_string()))?;
    let rough =
        RoughPath::new(path, areas, alpha).map_err(|e| Error::parse(lines.line_no, e.to_string()))?;

    let mut table = None;
    if lines.peek()?.map(|l| l.trim() == "table").unwrap_or(false) {
        lines.expect_line("table")?;
        let mut t = rough.full_table();
        let n = grid.n_points();
        for i in 0..n {
            for j in i + 1..n {
                let l = lines.expect_line("table entry")?;
                let ln = lines.line_no;
                let mut parts = l.splitn(3, char::is_whitespace);
                let pi: usize = parts
                    .next()
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| Error::parse(ln, "bad pair index"))?;
                let pj: usize = parts
                    .next()
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| Error::parse(ln, "bad pair index"))?;
                if (pi, pj) != (i, j) {
                    return Err(Error::parse(
                        ln,
                        format!("expected pair ({i}, {j}), found ({pi}, {pj})"),
                    ));
                }
                let vals = parse_floats(parts.next().unwrap_or(""), dim * dim, ln)?;
                t.set(i, j, &vals)?;
            }
        }
        table = Some(t);
    }
    Ok(RoughPathFile { rough, meta, table })
}
