//! Benchmark reports with recomputable summary statistics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Per-method, per-dataset benchmark outcome. The mean and standard
/// deviation are stored for readability but always derivable from
/// `errors` within 1e-12.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub method: String,
    pub dataset: String,
    /// Flat snapshot of the settings the run used.
    pub config: BTreeMap<String, String>,
    pub repetitions: usize,
    pub errors: Vec<f64>,
    pub mean_error: f64,
    pub std_error: f64,
    pub wall_seconds: f64,
}

/// Mean of a sample.
pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n-1 denominator); 0 for a single value,
/// matching "mean ± standard deviation across repetitions" reporting.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

impl BenchmarkReport {
    pub fn new(
        method: impl Into<String>,
        dataset: impl Into<String>,
        config: BTreeMap<String, String>,
        errors: Vec<f64>,
        wall_seconds: f64,
    ) -> BenchmarkReport {
        BenchmarkReport {
            method: method.into(),
            dataset: dataset.into(),
            config,
            repetitions: errors.len(),
            mean_error: mean(&errors),
            std_error: std_dev(&errors),
            errors,
            wall_seconds,
        }
    }

    /// Checks the stored summary against the per-repetition list.
    pub fn is_consistent(&self) -> bool {
        self.repetitions == self.errors.len()
            && (self.mean_error - mean(&self.errors)).abs() < 1e-12
            && (self.std_error - std_dev(&self.errors)).abs() < 1e-12
    }
}
