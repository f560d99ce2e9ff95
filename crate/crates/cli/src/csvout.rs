//! Minimal CSV output: comma-separated, `\n` line endings, header row
//! first.  Numbers are written with 17 significant digits so that parsing
//! them back reproduces the exact f64 values.

use std::io::{BufWriter, Write};
use std::path::Path;

use crate::CliError;

/// A single CSV cell.
pub enum Cell {
    Str(&'static str),
    Int(u64),
    Num(f64),
    Empty,
}

/// 17 significant digits, round-trip exact for f64.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

pub struct CsvWriter {
    out: BufWriter<std::fs::File>,
    columns: usize,
}

impl CsvWriter {
    pub fn create(path: &Path, header: &[&str]) -> Result<Self, CliError> {
        let file = std::fs::File::create(path)
            .map_err(|e| CliError::Io(format!("creating {}: {e}", path.display())))?;
        let mut w = CsvWriter {
            out: BufWriter::new(file),
            columns: header.len(),
        };
        w.write_line(&header.join(","))?;
        Ok(w)
    }

    fn write_line(&mut self, line: &str) -> Result<(), CliError> {
        self.out
            .write_all(line.as_bytes())
            .and_then(|_| self.out.write_all(b"\n"))
            .map_err(|e| CliError::Io(format!("writing csv: {e}")))
    }

    pub fn row(&mut self, cells: &[Cell]) -> Result<(), CliError> {
        assert_eq!(cells.len(), self.columns, "csv row width mismatch");
        let line = cells
            .iter()
            .map(|c| match c {
                Cell::Str(s) => (*s).to_string(),
                Cell::Int(v) => v.to_string(),
                Cell::Num(v) => fmt_num(*v),
                Cell::Empty => String::new(),
            })
            .collect::<Vec<_>>()
            .join(",");
        self.write_line(&line)
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.out
            .flush()
            .map_err(|e| CliError::Io(format!("flushing csv: {e}")))
    }
}
