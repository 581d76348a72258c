use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GrlError, Result};
use crate::rng::seeded;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub mean: f64,
    pub low: f64,
    pub high: f64,
}

impl ConfidenceInterval {
    /// True when the two intervals share no point.
    pub fn disjoint(&self, other: &ConfidenceInterval) -> bool {
        self.high < other.low || other.high < self.low
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Percentile bootstrap of the sample mean.
pub fn bootstrap_ci(values: &[f64], confidence: f64, resamples: usize, seed: u64) -> Result<ConfidenceInterval> {
    if values.len() < 2 {
        return Err(GrlError::InvalidArgument(format!(
            "bootstrap needs at least 2 values, got {}",
            values.len()
        )));
    }
    if !(confidence > 0.0 && confidence < 1.0) || resamples == 0 {
        return Err(GrlError::InvalidArgument(format!(
            "confidence must be in (0, 1) and resamples positive, got {confidence} and {resamples}"
        )));
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let mut rng = seeded(seed);
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| values[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let tail = (1.0 - confidence) / 2.0;
    Ok(ConfidenceInterval {
        mean,
        low: quantile(&means, tail).min(mean),
        high: quantile(&means, 1.0 - tail).max(mean),
    })
}
