//! Deterministic full-batch subgradient descent, the correctness oracle.
//!
//! Materializes the complete Gram matrix once and runs full subgradient
//! steps on the same objective the stochastic trainers estimate. A sampled
//! run with I = J = N walks the identical trajectory bit for bit, because
//! both paths share the block-gradient kernel and a full-index "sample"
//! is the natural-order index set.

use std::sync::Arc;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernel::{gram_block, KernelSpec};
use crate::model::DualModel;
use crate::objective::block_gradient_with_loss;
use crate::optimizer::StepSchedule;

/// Largest N for which the N x N Gram matrix may be materialized.
pub const FULL_GRAM_GUARD: usize = 5000;

/// Knobs of the full-batch reference solver.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchConfig {
    pub lambda: f64,
    pub eta0: f64,
    pub step_schedule: StepSchedule,
    pub max_iters: u64,
    /// Stop when the objective changes less than this between iterates;
    /// 0 disables the rule and the solver runs all `max_iters` steps.
    pub objective_tol: f64,
}

impl BatchConfig {
    pub fn new(lambda: f64, max_iters: u64) -> BatchConfig {
        BatchConfig {
            lambda,
            eta0: 1.0,
            step_schedule: StepSchedule::InverseIter,
            max_iters,
            objective_tol: 1e-8,
        }
    }
}

/// Full-batch reference training; see [`train_batch_observed`].
pub fn train_batch(
    dataset: &Arc<Dataset>,
    spec: &KernelSpec,
    lambda: f64,
    max_iters: u64,
) -> Result<DualModel> {
    train_batch_observed(dataset, spec, &BatchConfig::new(lambda, max_iters), |_, _| {})
}

/// Full-batch reference training with a per-iteration observer receiving
/// the iteration counter and the updated coefficients.
pub fn train_batch_observed(
    dataset: &Arc<Dataset>,
    spec: &KernelSpec,
    config: &BatchConfig,
    mut observer: impl FnMut(u64, &[f64]),
) -> Result<DualModel> {
    spec.validate()?;
    let n = dataset.len();
    if n == 0 {
        return Err(Error::InvalidParameter("cannot train on an empty dataset".into()));
    }
    if n > FULL_GRAM_GUARD {
        return Err(Error::BatchGuard {
            n,
            limit: FULL_GRAM_GUARD,
        });
    }
    if !(config.lambda > 0.0) || !(config.eta0 > 0.0) {
        return Err(Error::InvalidParameter(
            "lambda and eta0 must be positive".into(),
        ));
    }
    let full: Vec<usize> = (0..n).collect();
    let k = gram_block(dataset, &full, &full, spec)?;
    let y: Vec<f64> = (0..n).map(|i| dataset.label(i)).collect();
    let mut alpha = vec![0.0; n];
    // objective at the zero start: every hinge term is exactly 1
    let mut prev_obj = n as f64;
    for t in 1..=config.max_iters {
        let (g, hinge_sum) = block_gradient_with_loss(&k, &y, &alpha, 1.0, config.lambda);
        if let Some(bad) = g.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGradient {
                iteration: t,
                detail: format!("full-batch gradient coordinate {bad} is {}", g[bad]),
            });
        }
        // hinge_sum is evaluated at the pre-update iterate
        let obj = hinge_sum + config.lambda * alpha.iter().map(|a| a * a).sum::<f64>();
        if t > 1 && (prev_obj - obj).abs() < config.objective_tol {
            break;
        }
        prev_obj = obj;
        let eta = config.step_schedule.eta(config.eta0, t, t);
        for j in 0..n {
            alpha[j] -= eta * g[j];
        }
        observer(t, &alpha);
    }
    DualModel::new(alpha, dataset.clone(), *spec)
}
