//! Small descriptive statistics shared by the simulation drivers.

use serde::{Deserialize, Serialize};

/// Mean of replicated values with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloMean {
    pub mean: f64,
    pub std_error: f64,
}

impl MonteCarloMean {
    /// Sums in iteration order. The standard error is NaN for fewer than two values.
    pub fn from_slice(values: &[f64]) -> Self {
        let mean = mean(values);
        let std_error = if values.len() > 1 {
            let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
            (ss / (values.len() - 1) as f64 / values.len() as f64).sqrt()
        } else {
            f64::NAN
        };
        MonteCarloMean { mean, std_error }
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Median, averaging the two middle values for even lengths. NaN for empty input.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    if sorted.len().is_multiple_of(2) {
        0.5 * (sorted[mid - 1] + sorted[mid])
    } else {
        sorted[mid]
    }
}
