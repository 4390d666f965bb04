//! Result rows and their CSV/JSON serialization.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// One solver run on one instance; columns follow the experiment tables (dims, noise, budgets,
/// time, iterations, error metrics, objective, recovered rank and sparsity).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub instance: usize,
    pub model: String,
    pub m: usize,
    pub n: usize,
    pub n_meas: usize,
    pub eta: f64,
    pub seed: u64,
    pub repetition: usize,
    pub r: usize,
    pub s: usize,
    pub solver: String,
    /// Wall-clock solve time; excludes generation and I/O.
    pub time_s: f64,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub mre: Option<f64>,
    pub re: Option<f64>,
    pub rpre: Option<f64>,
    pub spa: Option<usize>,
    pub obj: Option<f64>,
    pub rank: Option<usize>,
    pub nnz: Option<usize>,
    pub vio_r: Option<f64>,
    pub vio_s: Option<f64>,
    pub converged: bool,
    pub flags: String,
    pub error: Option<String>,
}

/// Columns that depend on the machine rather than the computation.
pub const TIMING_COLUMNS: [&str; 1] = ["time_s"];

impl ResultRow {
    pub fn succeeded(&self) -> bool {
        self.error.is_none() && self.converged
    }

    /// Copy with the timing columns zeroed, for run-to-run comparisons.
    pub fn without_timing(&self) -> Self {
        ResultRow { time_s: 0.0, ..self.clone() }
    }
}

pub fn rows_to_csv(rows: &[ResultRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn rows_from_csv(text: &str) -> Result<Vec<ResultRow>> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for r in rd.deserialize() {
        out.push(r?);
    }
    Ok(out)
}

pub fn write_csv(path: &Path, rows: &[ResultRow]) -> Result<()> {
    std::fs::write(path, rows_to_csv(rows)?)?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<ResultRow>> {
    rows_from_csv(&std::fs::read_to_string(path)?)
}

pub fn write_json(path: &Path, rows: &[ResultRow]) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(rows)?)?;
    Ok(())
}
