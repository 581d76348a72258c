use std::path::Path;

use serde::Serialize;

use super::{bootstrap_ci, ConvergenceTrace, HeatmapCell, TransferMatrix};
use crate::error::{GrlError, Result};

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| GrlError::io(parent, e))?;
    }
    csv::Writer::from_path(path).map_err(Into::into)
}

/// Rows are the obstacle trained on, columns the obstacle evaluated on.
/// Undefined rates are left empty.
pub fn write_transfer_csv(path: &Path, m: &TransferMatrix) -> Result<()> {
    let mut w = writer(path)?;
    let mut header = vec!["trained_on".to_string()];
    header.extend(m.tasks.iter().map(|t| t.name().to_string()));
    w.write_record(&header)?;
    for (j, row) in m.rates.iter().enumerate() {
        let mut rec = vec![m.tasks[j].name().to_string()];
        rec.extend(row.iter().map(|r| r.map(|v| v.to_string()).unwrap_or_default()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| GrlError::io(path, e))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurveSummary {
    pub label: String,
    pub episode: u32,
    pub n: usize,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl CurveSummary {
    /// Per-episode mean and bootstrap interval over equally long curves.
    pub fn summarize(label: &str, curves: &[Vec<f64>], resamples: usize, seed: u64) -> Result<Vec<CurveSummary>> {
        let len = curves.iter().map(Vec::len).min().unwrap_or(0);
        (0..len)
            .map(|e| {
                let column: Vec<f64> = curves.iter().map(|c| c[e]).collect();
                let ci = bootstrap_ci(&column, 0.95, resamples, seed.wrapping_add(e as u64))?;
                Ok(CurveSummary {
                    label: label.to_string(),
                    episode: e as u32,
                    n: column.len(),
                    mean: ci.mean,
                    ci_low: ci.low,
                    ci_high: ci.high,
                })
            })
            .collect()
    }
}

pub(crate) fn write_rows<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| GrlError::InvalidArgument(e.to_string()))?;
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| GrlError::io(parent, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| GrlError::io(path, e))
}

pub fn write_curves_csv(path: &Path, rows: &[CurveSummary]) -> Result<()> {
    write_rows(path, &["label", "episode", "n", "mean", "ci_low", "ci_high"], rows)
}

pub fn write_trace_csv(path: &Path, trace: &ConvergenceTrace) -> Result<()> {
    let rows: Vec<(u32, String, f64)> = trace
        .generations
        .iter()
        .zip(&trace.probabilities)
        .flat_map(|(g, p)| p.iter().map(move |(f, v)| (*g, f.to_string(), *v)))
        .collect();
    write_rows(path, &["generation", "form", "probability"], &rows)
}

pub fn write_heatmap_csv(path: &Path, cells: &[HeatmapCell]) -> Result<()> {
    let rows: Vec<(u32, String, f64, usize)> = cells
        .iter()
        .map(|c| (c.generation, c.form.to_string(), c.mean_change, c.genes))
        .collect();
    write_rows(path, &["generation", "form", "mean_change", "genes"], &rows)
}
