//! CSV and JSON output.
//!
//! `trajectory.csv` columns:
//!
//! ```text
//! t, x1..xD, loss, grad_norm, k, phi1..phiD, phi_distance, lambda1, alignment, worst_sharpness
//! ```
//!
//! Diagnostics that were not computed for a record are empty cells. Floats
//! use the shortest round-trip representation (scientific below 1e-5), so a
//! deterministic run writes byte-identical files.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::densela::Vector;
use crate::error::{Error, Result};
use crate::optim::Trajectory;

use super::summary::RunSummary;

/// A named CSV table written next to the summary.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self { name: name.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.header).map_err(csv_err)?;
        for row in &self.rows {
            out.write_record(row).map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Config(format!("csv: {other:?}")),
    }
}

pub fn fmt(v: f64) -> String {
    format!("{v:?}")
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_default()
}

pub fn trajectory_header(dim: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend((1..=dim).map(|i| format!("x{i}")));
    h.extend(["loss", "grad_norm", "k"].map(String::from));
    h.extend((1..=dim).map(|i| format!("phi{i}")));
    h.extend(["phi_distance", "lambda1", "alignment", "worst_sharpness"].map(String::from));
    h
}

pub fn trajectory_table(traj: &Trajectory) -> Table {
    let header = trajectory_header(traj.dim);
    let mut table = Table { name: "trajectory".into(), header, rows: Vec::with_capacity(traj.records.len()) };
    for r in &traj.records {
        let mut row = vec![r.t.to_string()];
        row.extend(r.x.iter().copied().map(fmt));
        row.push(fmt(r.loss));
        row.push(fmt(r.grad_norm));
        row.push(r.k.map(|k| k.to_string()).unwrap_or_default());
        match &r.phi {
            Some(p) => row.extend(p.iter().copied().map(fmt)),
            None => row.extend(std::iter::repeat_n(String::new(), traj.dim)),
        }
        row.extend([opt(r.phi_distance), opt(r.lambda1), opt(r.alignment), opt(r.worst_sharpness)]);
        table.rows.push(row);
    }
    table
}

/// `tau, x1..xD` rows of a sampled curve.
pub fn curve_table(name: &str, dim: usize, samples: &[(f64, Vector)]) -> Table {
    let mut header = vec!["tau".to_string()];
    header.extend((1..=dim).map(|i| format!("x{i}")));
    let rows = samples
        .iter()
        .map(|(tau, x)| std::iter::once(fmt(*tau)).chain(x.iter().copied().map(fmt)).collect())
        .collect();
    Table { name: name.into(), header, rows }
}

/// Writes `summary.json` and one `<name>.csv` per table into `dir`.
pub fn write_all(dir: &Path, summary: &RunSummary, tables: &[Table]) -> Result<()> {
    for t in tables {
        let path = dir.join(format!("{}.csv", t.name));
        t.write(File::create(&path)?)?;
    }
    let mut f = File::create(dir.join("summary.json"))?;
    f.write_all(summary.to_json().as_bytes())?;
    f.write_all(b"\n")?;
    Ok(())
}
