//! CSV tables whose first line is `# {json}` metadata.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;

/// A CSV table with a JSON metadata header.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Value,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<H: Serialize>(header: &H, columns: &[&str]) -> Result<Self> {
        Ok(Self {
            header: serde_json::to_value(header)?,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        })
    }

    pub fn push_numbers(&mut self, row: &[f64]) {
        self.rows.push(row.iter().map(|v| v.to_string()).collect());
    }

    pub fn push_row(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# {}", serde_json::to_string(&self.header)?)?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::numerical(format!("non-utf8 csv output: {e}")))
    }

    /// Writes to a sibling temporary file and renames it into place.
    pub fn write_file(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_csv_string()?.as_bytes())
    }

    pub fn read<R: Read>(mut input: R) -> Result<Self> {
        let mut text = String::new();
        input.read_to_string(&mut text)?;
        let (header, body) = match text.strip_prefix("# ") {
            Some(rest) => {
                let end = rest.find('\n').unwrap_or(rest.len());
                (serde_json::from_str(&rest[..end])?, &rest[(end + 1).min(rest.len())..])
            }
            None => (Value::Null, text.as_str()),
        };
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(body.as_bytes());
        let columns = r.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            rows.push(rec?.iter().map(str::to_string).collect());
        }
        Ok(Self { header, columns, rows })
    }

    pub fn numeric_column(&self, index: usize) -> Result<Vec<f64>> {
        self.rows
            .iter()
            .map(|row| {
                let cell = row.get(index).ok_or_else(|| Error::Config(format!("missing column {index}")))?;
                cell.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Config(format!("bad number {cell:?}: {e}")))
            })
            .collect()
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp-write");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Loads a tabulated kernel from a two-column `(t, phi)` CSV with a header row.
pub fn load_tabulated_kernel(path: &Path) -> Result<KernelSpec> {
    let table = Table::read(fs::File::open(path)?)?;
    if table.columns.len() < 2 {
        return Err(Error::Config(format!("{} needs two columns (t, phi)", path.display())));
    }
    KernelSpec::tabulated(table.numeric_column(0)?, table.numeric_column(1)?)
}
