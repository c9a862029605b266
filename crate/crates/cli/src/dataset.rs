//! CSV datasets: a header of feature names plus an optional `label` column,
//! unsigned decimal cells.

use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use anyhow::{Context, Result};

use crate::Invalid;

pub const LABEL_COLUMN: &str = "label";

/// A column the caller expects, with its bit width.
pub struct Column<'a> {
    pub name: &'a str,
    pub width: u32,
}

/// Unvalidated CSV contents.
pub struct RawTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// Feature columns in the caller's order.
    pub x: Vec<Vec<u64>>,
    pub labels: Option<Vec<u64>>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.x.len()
    }
}

pub fn read_raw(path: &Path) -> Result<RawTable> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let header: Vec<String> = reader
        .headers()
        .with_context(|| format!("cannot read the header of {}", path.display()))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.with_context(|| format!("{}: row {}", path.display(), i + 1))?;
        let row = record
            .iter()
            .zip(&header)
            .map(|(cell, col)| {
                cell.parse::<u64>().map_err(|_| {
                    Invalid(format!(
                        "{}: row {}, column `{col}`: {cell:?} is not an unsigned integer",
                        path.display(),
                        i + 1
                    ))
                })
            })
            .collect::<Result<Vec<u64>, Invalid>>()?;
        rows.push(row);
    }
    Ok(RawTable { header, rows })
}

/// Reads `path`, requiring exactly the `expected` feature columns (in any
/// order) and at most one `label` column.
pub fn read(path: &Path, expected: &[Column]) -> Result<Dataset> {
    let raw = read_raw(path)?;
    let position = |name: &str| raw.header.iter().position(|h| h == name);
    for h in &raw.header {
        if h != LABEL_COLUMN && !expected.iter().any(|c| c.name == h) {
            return Err(Invalid(format!("{}: unexpected column `{h}`", path.display())).into());
        }
    }
    let mut index = Vec::with_capacity(expected.len());
    for c in expected {
        let i = position(c.name)
            .ok_or_else(|| Invalid(format!("{}: missing column `{}`", path.display(), c.name)))?;
        index.push(i);
    }
    let mut x = Vec::with_capacity(raw.rows.len());
    for (r, row) in raw.rows.iter().enumerate() {
        let values: Vec<u64> = index.iter().map(|&i| row[i]).collect();
        for (c, &v) in expected.iter().zip(&values) {
            if c.width < 64 && v >> c.width != 0 {
                return Err(Invalid(format!(
                    "{}: row {}, column `{}`: {v} does not fit in {} bits",
                    path.display(),
                    r + 1,
                    c.name,
                    c.width
                ))
                .into());
            }
        }
        x.push(values);
    }
    let labels = position(LABEL_COLUMN).map(|i| raw.rows.iter().map(|row| row[i]).collect());
    Ok(Dataset { x, labels })
}

/// Opens `path` for writing, or stdout when it is `None` or `-`.
pub fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    match path {
        Some(p) if p != Path::new("-") => {
            let f = File::create(p).with_context(|| format!("cannot create {}", p.display()))?;
            Ok(Box::new(io::BufWriter::new(f)))
        }
        _ => Ok(Box::new(io::BufWriter::new(io::stdout()))),
    }
}

pub fn write_rows(out: Box<dyn Write>, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
