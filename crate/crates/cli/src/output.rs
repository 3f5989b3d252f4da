//! Report envelopes and JSON/CSV emission.

use std::io::Write;

use curvlab_core::{FdScheme, C64};
use serde::Serialize;

use crate::config::{CliError, CliResult};
use crate::{Format, GlobalArgs};

/// Scalar table used for `--format csv`.
#[derive(Debug, Default)]
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
}

/// Every report carries the command, its resolved inputs and the scheme.
#[derive(Serialize)]
pub struct Report<'a, C: Serialize, R: Serialize> {
    pub command: &'static str,
    pub version: &'static str,
    pub global: &'a GlobalArgs,
    pub config: C,
    /// Absent for grid computations, which report their spacing instead.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheme: Option<FdScheme>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    pub passed: bool,
    pub results: R,
}

pub fn fmt_f(x: f64) -> String {
    format!("{:e}", x)
}

pub fn fmt_c(z: C64) -> String {
    if z.im == 0.0 {
        fmt_f(z.re)
    } else {
        format!("{:e}{:+e}i", z.re, z.im)
    }
}

pub fn fmt_point(p: &[C64]) -> String {
    p.iter().map(|&z| fmt_c(z)).collect::<Vec<_>>().join(";")
}

pub fn open_sink(out: Option<&std::path::Path>) -> CliResult<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(std::io::BufWriter::new(
            std::fs::File::create(path)
                .map_err(|e| CliError::Config(format!("cannot create {}: {}", path.display(), e)))?,
        )),
        None => Box::new(std::io::stdout().lock()),
    })
}

pub fn write_table<W: Write>(sink: W, table: &Table) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(&table.header).map_err(csv_err)?;
    for row in &table.rows {
        w.write_record(row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn csv_err(e: csv::Error) -> CliError {
    CliError::Config(format!("csv output: {}", e))
}

/// Writes the report once, as pretty JSON or as the command's table.
pub fn emit<C: Serialize, R: Serialize>(g: &GlobalArgs, report: &Report<C, R>, table: &Table) -> CliResult<()> {
    let mut sink = open_sink(g.out.as_deref())?;
    match g.format.unwrap_or(Format::Json) {
        Format::Json => {
            serde_json::to_writer_pretty(&mut sink, report).map_err(|e| CliError::Config(e.to_string()))?;
            writeln!(sink)?;
            sink.flush()?;
        }
        Format::Csv => write_table(sink, table)?,
    }
    Ok(())
}

/// Row-major nested vectors of a matrix.
pub fn rows(m: &nalgebra::DMatrix<C64>) -> Vec<Vec<C64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_formatting() {
        assert_eq!(fmt_c(C64::new(2.0, 0.0)), "2e0");
        assert_eq!(fmt_c(C64::new(0.5, -1.0)), "5e-1-1e0i");
    }
}
