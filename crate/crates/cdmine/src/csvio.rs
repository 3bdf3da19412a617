//! Minimal CSV reading/writing for sequences and result tables.
//!
//! Input: one sequence per row, comma-separated decimals, optional header
//! (detected by a non-numeric first line). Output tables are written in long
//! format with a header row; floats are printed with Rust's shortest
//! round-trip formatting, which makes identical runs byte-identical.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::transform::Sequence;

/// Parse rows of comma-separated numbers. A first line that fails to parse
/// is treated as a header and skipped; blank lines are ignored.
pub fn read_rows<R: BufRead>(reader: R) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = trimmed
            .split(',')
            .map(|tok| tok.trim().parse::<f64>())
            .collect();
        match parsed {
            Ok(values) => rows.push(values),
            Err(e) => {
                if lineno == 0 {
                    continue; // header
                }
                return Err(Error::Parse(format!("line {}: {e}", lineno + 1)));
            }
        }
    }
    Ok(rows)
}

/// Read sequences (each row one sequence, all rows the same length).
pub fn read_sequences<R: BufRead>(reader: R) -> Result<Vec<Sequence>> {
    let rows = read_rows(reader)?;
    if rows.is_empty() {
        return Err(Error::Parse("no data rows".into()));
    }
    let len = rows[0].len();
    rows.into_iter()
        .enumerate()
        .map(|(i, row)| {
            if row.len() != len {
                return Err(Error::Parse(format!(
                    "row {} has {} values, expected {len}",
                    i + 1,
                    row.len()
                )));
            }
            Sequence::new(row)
        })
        .collect()
}

/// Write sequences, one per row.
pub fn write_sequences<W: Write>(mut w: W, seqs: &[Sequence]) -> Result<()> {
    for seq in seqs {
        let row: Vec<String> = seq.values().iter().map(|v| format!("{v}")).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// A long-format output table with a fixed header.
pub struct LongTable<W: Write> {
    w: W,
}

impl<W: Write> LongTable<W> {
    pub fn new(mut w: W, columns: &[&str]) -> Result<Self> {
        writeln!(w, "{}", columns.join(","))?;
        Ok(LongTable { w })
    }

    pub fn row(&mut self, fields: &[&dyn std::fmt::Display]) -> Result<()> {
        let cells: Vec<String> = fields.iter().map(|f| format!("{f}")).collect();
        writeln!(self.w, "{}", cells.join(","))?;
        Ok(())
    }
}
