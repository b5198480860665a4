//! Text formats: field files, snapshot tables and the diagnostics series.
//!
//! Field files hold a `dim resolution` header followed by one node value per
//! line in domain order. Values are written in Rust's shortest round-trip
//! notation, so reading a written file reproduces every bit.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use thiserror::Error;

use crate::flow::DiagnosticsRecord;
use crate::geometry::{snapshot_rows, SupportField};
use crate::sphere::{DomainError, ScalarField, SphereDomain};

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("expected {expected} values, found {got}")]
    Count { expected: usize, got: usize },
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("table is empty")]
    Empty,
}

fn format_error(line: usize, message: impl Into<String>) -> IoError {
    IoError::Format {
        line,
        message: message.into(),
    }
}

pub fn write_field<W: Write>(mut w: W, field: &ScalarField) -> io::Result<()> {
    let d = field.domain();
    writeln!(w, "{} {}", d.dim(), d.resolution())?;
    for v in field.values() {
        writeln!(w, "{v:?}")?;
    }
    w.flush()
}

/// Reads a field file. Blank lines are ignored.
pub fn read_field<R: BufRead>(r: R) -> Result<ScalarField, IoError> {
    let mut lines = r
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| l.as_ref().map_or(true, |s| !s.trim().is_empty()));
    let (line, header) = lines.next().ok_or(IoError::Empty)?;
    let header = header?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    let [dim, res] = parts[..] else {
        return Err(format_error(line, "header must be `dim resolution`"));
    };
    let dim: usize = dim
        .parse()
        .map_err(|_| format_error(line, format!("bad dimension `{dim}`")))?;
    let res: usize = res
        .parse()
        .map_err(|_| format_error(line, format!("bad resolution `{res}`")))?;
    let domain = SphereDomain::build(dim, res)?;
    let mut values = Vec::with_capacity(domain.node_count());
    for (line, text) in lines {
        let text = text?;
        let t = text.trim();
        let v: f64 = t
            .parse()
            .map_err(|_| format_error(line, format!("bad value `{t}`")))?;
        values.push(v);
    }
    if values.len() != domain.node_count() {
        return Err(IoError::Count {
            expected: domain.node_count(),
            got: values.len(),
        });
    }
    Ok(ScalarField::new(domain, values)?)
}

pub fn save_field(path: &Path, field: &ScalarField) -> Result<(), IoError> {
    write_field(BufWriter::new(File::create(path)?), field)?;
    Ok(())
}

pub fn load_field(path: &Path) -> Result<ScalarField, IoError> {
    read_field(BufReader::new(File::open(path)?))
}

/// Loads a field and checks it against an expected domain.
pub fn load_field_on(path: &Path, domain: &Arc<SphereDomain>) -> Result<ScalarField, IoError> {
    let field = load_field(path)?;
    let d = field.domain();
    if d.dim() != domain.dim() || d.resolution() != domain.resolution() {
        return Err(DomainError::Mismatch {
            dim: domain.dim(),
            res: domain.resolution(),
            got_dim: d.dim(),
            got_res: d.resolution(),
        }
        .into());
    }
    Ok(ScalarField::new(domain.clone(), field.into_values())?)
}

/// Comma-separated table with a one-line header.
pub fn write_table<W: Write>(mut w: W, header: &[String], rows: &[Vec<f64>]) -> io::Result<()> {
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    w.flush()
}

/// Per-node geometry of `u`: `x…, X…, u, H, min_eig_h`.
pub fn write_snapshot<W: Write>(w: W, u: &SupportField) -> io::Result<()> {
    let (header, rows) = snapshot_rows(u);
    write_table(w, &header, &rows)
}

pub fn write_diagnostics<W: Write>(mut w: W, records: &[DiagnosticsRecord]) -> io::Result<()> {
    writeln!(w, "{}", DiagnosticsRecord::CSV_HEADER)?;
    for r in records {
        writeln!(w, "{}", r.csv_row())?;
    }
    w.flush()
}

/// A numeric table read back from text.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }
}

/// Reads a comma-separated numeric table. An empty file, or a header with
/// no rows, is an error.
pub fn read_table<R: BufRead>(r: R) -> Result<Table, IoError> {
    let mut lines = r.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines.next().ok_or(IoError::Empty)?;
    let header = header?;
    if header.trim().is_empty() {
        return Err(IoError::Empty);
    }
    let columns: Vec<String> = header.split(',').map(|c| c.trim().to_string()).collect();
    let mut rows = Vec::new();
    for (line, text) in lines {
        let text = text?;
        if text.trim().is_empty() {
            continue;
        }
        let row = text
            .split(',')
            .map(|c| {
                let c = c.trim();
                c.parse::<f64>()
                    .map_err(|_| format_error(line, format!("bad value `{c}`")))
            })
            .collect::<Result<Vec<f64>, _>>()?;
        if row.len() != columns.len() {
            return Err(format_error(
                line,
                format!("{} cells, header has {}", row.len(), columns.len()),
            ));
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(IoError::Empty);
    }
    Ok(Table { columns, rows })
}

/// Reads a diagnostics series and checks its columns.
pub fn read_diagnostics<R: BufRead>(r: R) -> Result<Table, IoError> {
    let table = read_table(r)?;
    let expected: Vec<&str> = DiagnosticsRecord::CSV_HEADER.split(',').collect();
    if table.columns != expected {
        return Err(format_error(
            1,
            format!("expected columns `{}`", DiagnosticsRecord::CSV_HEADER),
        ));
    }
    Ok(table)
}
