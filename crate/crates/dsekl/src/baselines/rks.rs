//! Random kitchen sinks: a linear model over random Fourier features that
//! approximate the RBF kernel.
//!
//! With frequencies drawn from N(0, 1/sigma^2) and phases from U[0, 2pi),
//! the map z(x) = sqrt(2/J_feat) * cos(Wx + b) satisfies
//! E[<z(x), z(y)>] = exp(-||x - y||^2 / (2 sigma^2)), so a linear model on
//! z approximates the kernel machine with a data-independent expansion.

use std::f64::consts::TAU;
use std::sync::Arc;
use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::{Dataset, SparseRow};
use crate::error::{Error, Result};
use crate::model::DecisionModel;
use crate::optimizer::{sample_indices, Checkpoint, RunRecord, TrainConfig};
use crate::rng::{derive_seed, rng_from_seed};

/// Random stream label for drawing the feature map, kept apart from the
/// index-sampling stream.
const MAP_STREAM: u64 = 0x524b_535f_4d41_5000;

/// Random Fourier feature map for the RBF kernel.
#[derive(Debug, Clone)]
pub struct RksFeatureMap {
    /// J_feat x dim, row-major.
    frequencies: Vec<f64>,
    phases: Vec<f64>,
    scale: f64,
    sigma: f64,
    dim: usize,
    j_feat: usize,
}

impl RksFeatureMap {
    /// Draws a fresh map for `dim`-dimensional inputs.
    pub fn sample(dim: usize, j_feat: usize, sigma: f64, rng: &mut ChaCha8Rng) -> Result<RksFeatureMap> {
        if j_feat == 0 {
            return Err(Error::InvalidParameter("J_feat must be at least 1".into()));
        }
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "RKS sigma must be positive and finite, got {sigma}"
            )));
        }
        let normal = Normal::new(0.0, 1.0 / sigma).expect("validated std dev");
        let frequencies: Vec<f64> = (0..j_feat * dim).map(|_| normal.sample(rng)).collect();
        let phases: Vec<f64> = (0..j_feat).map(|_| rng.gen_range(0.0..TAU)).collect();
        Ok(RksFeatureMap {
            frequencies,
            phases,
            scale: (2.0 / j_feat as f64).sqrt(),
            sigma,
            dim,
            j_feat,
        })
    }

    /// Builds a map from explicit frequencies and phases, mainly for tests
    /// and serialization.
    pub fn from_parts(
        dim: usize,
        j_feat: usize,
        frequencies: Vec<f64>,
        phases: Vec<f64>,
        sigma: f64,
    ) -> Result<RksFeatureMap> {
        if frequencies.len() != j_feat * dim || phases.len() != j_feat {
            return Err(Error::InvalidParameter(format!(
                "map shape mismatch: {} frequencies and {} phases for J_feat = {j_feat}, dim = {dim}",
                frequencies.len(),
                phases.len()
            )));
        }
        if !(sigma > 0.0) {
            return Err(Error::InvalidParameter("sigma must be positive".into()));
        }
        Ok(RksFeatureMap {
            frequencies,
            phases,
            scale: (2.0 / j_feat as f64).sqrt(),
            sigma,
            dim,
            j_feat,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn j_feat(&self) -> usize {
        self.j_feat
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

/// Applies the feature map: z(x)_m = scale * cos(w_m . x + b_m).
pub fn rks_transform(x: &SparseRow, map: &RksFeatureMap) -> Result<Vec<f64>> {
    if x.dim() != map.dim {
        return Err(Error::DimensionMismatch {
            left: x.dim(),
            right: map.dim,
        });
    }
    let mut z = Vec::with_capacity(map.j_feat);
    for m in 0..map.j_feat {
        let row = &map.frequencies[m * map.dim..(m + 1) * map.dim];
        let mut arg = map.phases[m];
        for (d, v) in x.iter() {
            arg += row[d] * v;
        }
        z.push(map.scale * arg.cos());
    }
    Ok(z)
}

/// Weights of a linear model over feature-map outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    weights: Vec<f64>,
}

impl LinearModel {
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Linear model bundled with its feature map; predicts sign(w . z(x)).
#[derive(Debug, Clone)]
pub struct RksModel {
    map: RksFeatureMap,
    linear: LinearModel,
}

impl RksModel {
    pub fn map(&self) -> &RksFeatureMap {
        &self.map
    }

    pub fn linear(&self) -> &LinearModel {
        &self.linear
    }
}

impl DecisionModel for RksModel {
    fn decision(&self, x: &SparseRow) -> Result<f64> {
        let z = rks_transform(x, &self.map)?;
        Ok(self
            .linear
            .weights
            .iter()
            .zip(&z)
            .map(|(w, zi)| w * zi)
            .sum())
    }
}

/// SGD on the hinge objective in the explicit random-feature space.
///
/// Shares the gradient batch size, schedule, and stopping rule with the
/// doubly stochastic config for controlled comparisons; `J_feat` plays the
/// role of the expansion size. The transformed training set is cached up
/// front, so memory is O(N * J_feat).
pub fn train_rks(
    dataset: &Arc<Dataset>,
    sigma: f64,
    j_feat: usize,
    config: &TrainConfig,
    validation: Option<&Dataset>,
) -> Result<(RksModel, RunRecord)> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::InvalidParameter("cannot train on an empty dataset".into()));
    }
    let n = dataset.len();
    let i_size = config.grad_batch_size.min(n);
    let iters_per_epoch = n.div_ceil(i_size);
    let reg_scale = i_size as f64 / n as f64;
    let obj_grad_scale = n as f64 / i_size as f64;

    let mut map_rng = rng_from_seed(derive_seed(config.seed, MAP_STREAM));
    let map = RksFeatureMap::sample(dataset.dim(), j_feat, sigma, &mut map_rng)?;
    let z_train: Vec<Vec<f64>> = (0..n)
        .map(|i| rks_transform(dataset.row(i), &map))
        .collect::<Result<_>>()?;
    let z_val: Option<(Vec<Vec<f64>>, &Dataset)> = match validation {
        Some(v) => Some((
            (0..v.len())
                .map(|i| rks_transform(v.row(i), &map))
                .collect::<Result<_>>()?,
            v,
        )),
        None => None,
    };

    let mut w = vec![0.0; j_feat];
    let val_err = |w: &[f64]| -> Option<f64> {
        z_val.as_ref().map(|(z, v)| {
            let wrong = z
                .iter()
                .zip(v.labels())
                .filter(|(zi, &y)| {
                    let f: f64 = w.iter().zip(zi.iter()).map(|(a, b)| a * b).sum();
                    let pred = if f < 0.0 { -1.0 } else { 1.0 };
                    pred != y
                })
                .count();
            wrong as f64 / v.len() as f64
        })
    };

    let start = Instant::now();
    let mut record = RunRecord {
        peak_block_entries: n * j_feat,
        ..RunRecord::default()
    };
    record.checkpoints.push(Checkpoint {
        iteration: 0,
        epoch: 0.0,
        objective_estimate: n as f64,
        validation_error: val_err(&w),
        elapsed_seconds: start.elapsed().as_secs_f64(),
        is_epoch_end: false,
    });

    let mut rng = rng_from_seed(config.seed);
    let mut t: u64 = 0;
    let mut epoch_start_w = w.clone();
    let mut g = vec![0.0; j_feat];
    for epoch in 1..=config.max_epochs {
        let mut epoch_obj_sum = 0.0;
        for _ in 0..iters_per_epoch {
            t += 1;
            let grad_batch = sample_indices(n, i_size, &mut rng);
            g.iter_mut().for_each(|v| *v = 0.0);
            let mut hinge_sum = 0.0;
            for &i in &grad_batch {
                let zi = &z_train[i];
                let yi = dataset.label(i);
                let f: f64 = w.iter().zip(zi.iter()).map(|(a, b)| a * b).sum();
                let margin = yi * f;
                hinge_sum += (1.0 - margin).max(0.0);
                if margin < 1.0 {
                    for (gm, zm) in g.iter_mut().zip(zi.iter()) {
                        *gm -= yi * zm;
                    }
                }
            }
            let reg_coef = reg_scale * 2.0 * config.lambda;
            for (gm, wm) in g.iter_mut().zip(w.iter()) {
                *gm += reg_coef * wm;
            }
            if let Some(bad) = g.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteGradient {
                    iteration: t,
                    detail: format!("RKS gradient coordinate {bad} is {}", g[bad]),
                });
            }
            let sq_w: f64 = w.iter().map(|a| a * a).sum();
            let eta = config.step_schedule.eta(config.eta0, t, epoch as u64);
            for (wm, gm) in w.iter_mut().zip(g.iter()) {
                *wm -= eta * gm;
            }
            let obj = obj_grad_scale * hinge_sum + config.lambda * sq_w;
            epoch_obj_sum += obj;
            if t <= 10 {
                record.checkpoints.push(Checkpoint {
                    iteration: t,
                    epoch: (t * i_size as u64) as f64 / n as f64,
                    objective_estimate: obj,
                    validation_error: val_err(&w),
                    elapsed_seconds: start.elapsed().as_secs_f64(),
                    is_epoch_end: false,
                });
            }
        }
        record.checkpoints.push(Checkpoint {
            iteration: t,
            epoch: (t * i_size as u64) as f64 / n as f64,
            objective_estimate: epoch_obj_sum / iters_per_epoch as f64,
            validation_error: val_err(&w),
            elapsed_seconds: start.elapsed().as_secs_f64(),
            is_epoch_end: true,
        });
        let delta: f64 = w
            .iter()
            .zip(&epoch_start_w)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        epoch_start_w.copy_from_slice(&w);
        if delta < config.stop_weight_delta {
            record.stopped_early = true;
            break;
        }
    }
    record.iterations = t;
    record.final_epoch = (t * i_size as u64) as f64 / n as f64;
    record.total_seconds = start.elapsed().as_secs_f64();
    Ok((
        RksModel {
            map,
            linear: LinearModel { weights: w },
        },
        record,
    ))
}
