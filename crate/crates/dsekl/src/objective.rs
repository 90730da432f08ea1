//! Hinge-loss objective, stochastic block subgradient, and their oracles.
//!
//! The subgradient of one sampled block is the workhorse of training. Both
//! the doubly stochastic trainers and the full-batch reference funnel
//! through [`block_gradient`], so a full-index "sample" reproduces the
//! batch computation bit for bit.

use crate::error::{Error, Result};
use crate::kernel::{gram_block, GramBlock};
use crate::model::{DecisionModel, DualModel};

/// Gradient restricted to the sampled expansion coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseGradient {
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseGradient {
    pub(crate) fn new(indices: Vec<usize>, values: Vec<f64>) -> SparseGradient {
        debug_assert_eq!(indices.len(), values.len());
        SparseGradient { indices, values }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    /// Euclidean norm of the stored values.
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Block subgradient from a materialized |I| x |J| kernel block.
///
/// `y` holds the labels of the gradient batch in batch order, `alpha_j`
/// the coefficients of the expansion batch in batch order, and `reg_scale`
/// the |I|/N factor that spreads the regularizer over an epoch.
///
/// For each expansion position j:
///   g_j = reg_scale * 2 * lambda * alpha_j  -  sum over violated i of y_i K_ij
/// where row i is violated iff y_i * (K alpha)_i < 1. A margin of exactly 1
/// contributes nothing. Accumulation order is fixed (rows in batch order,
/// regularizer added last) so that equal inputs give bitwise equal output.
///
/// Also returns the batch hinge sum at the current coefficients, which the
/// trainers reuse for objective tracking.
pub(crate) fn block_gradient_with_loss(
    k: &GramBlock,
    y: &[f64],
    alpha_j: &[f64],
    reg_scale: f64,
    lambda: f64,
) -> (Vec<f64>, f64) {
    debug_assert_eq!(k.n_rows(), y.len());
    debug_assert_eq!(k.n_cols(), alpha_j.len());
    let cols = alpha_j.len();
    let mut g = vec![0.0; cols];
    let mut hinge_sum = 0.0;
    for (i, &yi) in y.iter().enumerate() {
        let row = k.row(i);
        let mut f_hat = 0.0;
        for j in 0..cols {
            f_hat += row[j] * alpha_j[j];
        }
        let margin = yi * f_hat;
        hinge_sum += (1.0 - margin).max(0.0);
        if margin < 1.0 {
            for j in 0..cols {
                g[j] -= yi * row[j];
            }
        }
    }
    let reg_coef = reg_scale * 2.0 * lambda;
    for j in 0..cols {
        g[j] += reg_coef * alpha_j[j];
    }
    (g, hinge_sum)
}

pub(crate) fn block_gradient(
    k: &GramBlock,
    y: &[f64],
    alpha_j: &[f64],
    reg_scale: f64,
    lambda: f64,
) -> Vec<f64> {
    block_gradient_with_loss(k, y, alpha_j, reg_scale, lambda).0
}

/// Stochastic subgradient over sampled gradient batch I and expansion
/// batch J, using the J-restricted decision estimate for the margin test.
pub fn subgradient(
    model: &DualModel,
    grad_batch: &[usize],
    expansion_batch: &[usize],
    lambda: f64,
) -> Result<SparseGradient> {
    if grad_batch.is_empty() || expansion_batch.is_empty() {
        return Err(Error::InvalidParameter(
            "gradient and expansion batches must be non-empty".into(),
        ));
    }
    let data = model.expansion();
    let k = gram_block(data, grad_batch, expansion_batch, model.spec())?;
    let y: Vec<f64> = grad_batch.iter().map(|&i| data.label(i)).collect();
    let alpha_j: Vec<f64> = expansion_batch.iter().map(|&j| model.alpha()[j]).collect();
    let reg_scale = grad_batch.len() as f64 / data.len() as f64;
    let g = block_gradient(&k, &y, &alpha_j, reg_scale, lambda);
    Ok(SparseGradient::new(expansion_batch.to_vec(), g))
}

/// Regularized hinge objective over a batch with the full-support decision
/// function: sum_i max(0, 1 - y_i f(x_i)) + lambda * ||alpha||^2.
pub fn objective_value(model: &DualModel, batch: &[usize], lambda: f64) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::InvalidParameter("objective batch must be non-empty".into()));
    }
    let data = model.expansion();
    let mut loss = 0.0;
    for &i in batch {
        if i >= data.len() {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: data.len(),
            });
        }
        let f = model.decision(data.row(i))?;
        loss += (1.0 - data.label(i) * f).max(0.0);
    }
    let sq_norm: f64 = model.alpha().iter().map(|a| a * a).sum();
    Ok(loss + lambda * sq_norm)
}

/// Objective of the block-restricted stochastic estimate: hinge terms use
/// only the expansion batch, and the regularizer covers only those
/// coordinates, scaled by |I|/N. The subgradient of this function at the
/// current alpha is exactly [`subgradient`]; exposed for oracle testing.
pub fn block_objective_value(
    model: &DualModel,
    grad_batch: &[usize],
    expansion_batch: &[usize],
    lambda: f64,
) -> Result<f64> {
    let data = model.expansion();
    let k = gram_block(data, grad_batch, expansion_batch, model.spec())?;
    let mut loss = 0.0;
    for (bi, &i) in grad_batch.iter().enumerate() {
        let mut f_hat = 0.0;
        for (bj, &j) in expansion_batch.iter().enumerate() {
            f_hat += k.get(bi, bj) * model.alpha()[j];
        }
        loss += (1.0 - data.label(i) * f_hat).max(0.0);
    }
    let reg_scale = grad_batch.len() as f64 / data.len() as f64;
    let sq: f64 = expansion_batch
        .iter()
        .map(|&j| model.alpha()[j] * model.alpha()[j])
        .sum();
    Ok(loss + reg_scale * lambda * sq)
}
