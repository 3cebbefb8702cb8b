//! CSV and JSON report rows with frozen column schemas.

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::formats::csv_err;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRow {
    pub epoch: usize,
    pub lr: f64,
    pub loss: &'static str,
    pub train_loss: f64,
    pub val_mean_angle_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalRow {
    pub object_id: String,
    pub index: usize,
    pub true_angle_deg: f64,
    pub err_deg: f64,
    pub baseline_err_deg: f64,
    pub shapematch_loss: Option<f64>,
    /// The estimator could not use the observation; identity was scored.
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinRow {
    pub bin_lo_deg: f64,
    pub bin_hi_deg: f64,
    pub count: usize,
    pub mean_err_deg: f64,
    pub mean_baseline_err_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub k: usize,
    pub qr: f64,
    pub qi: f64,
    pub qj: f64,
    pub qk: f64,
    pub pred_angle_deg: Option<f64>,
    pub true_err_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRow {
    pub object_id: String,
    pub trial: usize,
    pub initial_err_deg: f64,
    pub final_err_deg: f64,
    pub status: &'static str,
    pub iterations: usize,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymmetryRow {
    pub object_id: String,
    pub score: f64,
    pub threshold: f64,
    pub flagged: bool,
}

pub fn write_csv<T: Serialize>(path: impl AsRef<Path>, rows: &[T]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Means of the per-sample errors in `width`-degree bins of the true angle.
/// Empty bins are omitted.
pub fn bin_errors(rows: &[EvalRow], width: f64) -> Vec<BinRow> {
    let mut bins: Vec<(usize, f64, f64)> = Vec::new();
    for r in rows {
        let b = (r.true_angle_deg / width).floor().max(0.0) as usize;
        if bins.len() <= b {
            bins.resize(b + 1, (0, 0.0, 0.0));
        }
        bins[b].0 += 1;
        bins[b].1 += r.err_deg;
        bins[b].2 += r.baseline_err_deg;
    }
    bins.into_iter()
        .enumerate()
        .filter(|(_, (n, _, _))| *n > 0)
        .map(|(b, (n, e, base))| BinRow {
            bin_lo_deg: b as f64 * width,
            bin_hi_deg: (b + 1) as f64 * width,
            count: n,
            mean_err_deg: e / n as f64,
            mean_baseline_err_deg: base / n as f64,
        })
        .collect()
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}
