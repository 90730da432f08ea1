//! Shared-memory parallel training with dampened aggregation.
//!
//! One outer step processes a single gradient batch against K disjoint
//! expansion blocks, one per worker. Workers read a snapshot of the
//! coefficients, and a single synchronized aggregation phase applies all
//! updates after every worker has finished. Because the expansion blocks
//! are disjoint, per-coordinate sums never contend and the result is
//! independent of worker scheduling.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernel::{gram_block, KernelSpec};
use crate::model::{DecisionModel, DualModel};
use crate::objective::block_gradient_with_loss;
use crate::optimizer::{sample_indices, Checkpoint, RunRecord, TrainConfig};
use crate::rng::rng_from_seed;

/// Per-coordinate sum of squared gradients, initialized to 1 so the first
/// dampened step is at most the raw step.
#[derive(Debug, Clone)]
pub struct DampeningAccumulator {
    g: Vec<f64>,
}

impl DampeningAccumulator {
    pub fn new(n: usize) -> DampeningAccumulator {
        DampeningAccumulator { g: vec![1.0; n] }
    }

    /// Adds the squared gradient for coordinate `j`.
    #[inline]
    pub fn accumulate(&mut self, j: usize, grad: f64) {
        self.g[j] += grad * grad;
    }

    /// Multiplier G_j^{-1/2} applied to the step on coordinate `j`.
    #[inline]
    pub fn factor(&self, j: usize) -> f64 {
        1.0 / self.g[j].sqrt()
    }

    pub fn values(&self) -> &[f64] {
        &self.g
    }
}

/// Draws up to `k` disjoint batches of `batch_size` indices from [0, n).
///
/// The batch count drops when n cannot supply k disjoint batches. A single
/// batch goes through [`sample_indices`], so the k = 1, full-set case
/// consumes no randomness and lines up with the serial sampler.
fn partition_family(
    n: usize,
    batch_size: usize,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<usize>> {
    let b = batch_size.min(n).max(1);
    let k_eff = (n / b).min(k).max(1);
    if k_eff < k {
        log::warn!(
            "partition reduced to {k_eff} batches of {b}: {n} points cannot fill {k} batches of {batch_size}"
        );
    }
    if k_eff == 1 {
        return vec![sample_indices(n, b, rng)];
    }
    let total = k_eff * b;
    let idx = if total < n {
        sample_indices(n, total, rng)
    } else {
        let mut all: Vec<usize> = (0..n).collect();
        all.shuffle(rng);
        all
    };
    idx.chunks(b).take(k_eff).map(|c| c.to_vec()).collect()
}

/// K disjoint gradient batches and K disjoint expansion batches of the
/// same size, drawn without replacement within each family.
pub fn partition_batches(
    n: usize,
    batch_size: usize,
    k_workers: usize,
    rng: &mut ChaCha8Rng,
) -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
    let grad = partition_family(n, batch_size, k_workers, rng);
    let exp = partition_family(n, batch_size, k_workers, rng);
    (grad, exp)
}

/// One worker's gradient over its expansion block, computed against a
/// coefficient snapshot. Panics inside are converted to errors.
fn worker_gradient(
    dataset: &Dataset,
    spec: &KernelSpec,
    grad_batch: &[usize],
    y: &[f64],
    exp_block: &[usize],
    alpha: &[f64],
    reg_scale: f64,
    lambda: f64,
) -> Result<(Vec<f64>, f64)> {
    catch_unwind(AssertUnwindSafe(|| {
        let k = gram_block(dataset, grad_batch, exp_block, spec)?;
        let alpha_j: Vec<f64> = exp_block.iter().map(|&j| alpha[j]).collect();
        Ok(block_gradient_with_loss(&k, y, &alpha_j, reg_scale, lambda))
    }))
    .unwrap_or_else(|panic| {
        let msg = panic
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| panic.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "worker panicked".into());
        Err(Error::Worker(msg))
    })
}

/// Algorithm: doubly stochastic training with K parallel expansion blocks
/// and AdaGrad-style dampening.
///
/// With one worker and `config.dampening = false` this reproduces
/// [`crate::optimizer::train_serial`] exactly. `config.fixed_blocks` keeps
/// the first partition for the whole run instead of drawing a fresh one
/// whenever the gradient batches are exhausted.
pub fn train_parallel(
    dataset: &Arc<Dataset>,
    spec: &KernelSpec,
    config: &TrainConfig,
    validation: Option<&Dataset>,
) -> Result<(DualModel, RunRecord)> {
    spec.validate()?;
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::InvalidParameter("cannot train on an empty dataset".into()));
    }
    let n = dataset.len();
    let i_size = config.grad_batch_size.min(n);
    let j_size = config.expansion_size.min(n);
    let iters_per_epoch = n.div_ceil(i_size);
    let reg_scale = i_size as f64 / n as f64;
    let obj_grad_scale = n as f64 / i_size as f64;

    let mut rng = rng_from_seed(config.seed);
    let mut model = DualModel::zeros(dataset.clone(), *spec)?;
    let mut damp = DampeningAccumulator::new(n);
    let start = Instant::now();
    let mut record = RunRecord::default();
    let val_err = |m: &DualModel| -> Result<Option<f64>> {
        validation.map(|v| m.error_rate(v)).transpose()
    };
    record.checkpoints.push(Checkpoint {
        iteration: 0,
        epoch: 0.0,
        objective_estimate: n as f64,
        validation_error: val_err(&model)?,
        elapsed_seconds: start.elapsed().as_secs_f64(),
        is_epoch_end: false,
    });

    let mut t: u64 = 0;
    let mut epoch_start_alpha = model.alpha().to_vec();
    let mut grad_batches: Vec<Vec<usize>> = Vec::new();
    let mut exp_blocks: Vec<Vec<usize>> = Vec::new();
    let mut cursor = 0usize;
    for epoch in 1..=config.max_epochs {
        let mut epoch_obj_sum = 0.0;
        for _ in 0..iters_per_epoch {
            t += 1;
            if cursor == grad_batches.len() {
                cursor = 0;
                if grad_batches.is_empty() || !config.fixed_blocks {
                    grad_batches = partition_family(n, i_size, config.workers, &mut rng);
                    exp_blocks = partition_family(n, j_size, config.workers, &mut rng);
                }
            }
            let grad_batch = &grad_batches[cursor];
            cursor += 1;
            let y: Vec<f64> = grad_batch.iter().map(|&i| dataset.label(i)).collect();

            let alpha_snapshot = model.alpha();
            let results: Vec<Result<(Vec<f64>, f64)>> = exp_blocks
                .par_iter()
                .map(|block| {
                    worker_gradient(
                        dataset,
                        spec,
                        grad_batch,
                        &y,
                        block,
                        alpha_snapshot,
                        reg_scale,
                        config.lambda,
                    )
                })
                .collect();
            // validate every block before touching alpha or G: a failed
            // outer step must leave no partial updates behind
            let mut gradients = Vec::with_capacity(results.len());
            let mut hinge_total = 0.0;
            for r in results {
                let (g, hinge) = r?;
                if let Some(bad) = g.iter().position(|v| !v.is_finite()) {
                    return Err(Error::NonFiniteGradient {
                        iteration: t,
                        detail: format!("worker gradient entry {bad} is {}", g[bad]),
                    });
                }
                hinge_total += hinge;
                gradients.push(g);
            }

            let eta = config.step_schedule.eta(config.eta0, t, epoch as u64);
            let sq_j: f64 = exp_blocks
                .iter()
                .flatten()
                .map(|&j| alpha_snapshot[j] * alpha_snapshot[j])
                .sum();
            let alpha = model.alpha_mut();
            for (block, g) in exp_blocks.iter().zip(&gradients) {
                for (bj, &j) in block.iter().enumerate() {
                    if config.dampening {
                        damp.accumulate(j, g[bj]);
                        alpha[j] -= eta * damp.factor(j) * g[bj];
                    } else {
                        alpha[j] -= eta * g[bj];
                    }
                }
            }

            // hinge is summed over all blocks; each worker scores the same
            // gradient batch against its own expansion coordinates, so the
            // objective estimate spreads over the union of the blocks
            let union_len: usize = exp_blocks.iter().map(|b| b.len()).sum();
            let obj = obj_grad_scale * hinge_total / exp_blocks.len() as f64
                + config.lambda * (n as f64 / union_len as f64) * sq_j;
            epoch_obj_sum += obj;
            if t <= 10 {
                record.checkpoints.push(Checkpoint {
                    iteration: t,
                    epoch: (t * i_size as u64) as f64 / n as f64,
                    objective_estimate: obj,
                    validation_error: val_err(&model)?,
                    elapsed_seconds: start.elapsed().as_secs_f64(),
                    is_epoch_end: false,
                });
            }
        }
        record.checkpoints.push(Checkpoint {
            iteration: t,
            epoch: (t * i_size as u64) as f64 / n as f64,
            objective_estimate: epoch_obj_sum / iters_per_epoch as f64,
            validation_error: val_err(&model)?,
            elapsed_seconds: start.elapsed().as_secs_f64(),
            is_epoch_end: true,
        });
        let delta: f64 = model
            .alpha()
            .iter()
            .zip(&epoch_start_alpha)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        epoch_start_alpha.copy_from_slice(model.alpha());
        if delta < config.stop_weight_delta {
            record.stopped_early = true;
            break;
        }
    }
    record.iterations = t;
    record.final_epoch = (t * i_size as u64) as f64 / n as f64;
    record.peak_block_entries = i_size * j_size * config.workers.max(1);
    record.total_seconds = start.elapsed().as_secs_f64();
    Ok((model, record))
}

/// One row of a speedup measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedupRow {
    pub workers: usize,
    pub seconds: f64,
    pub speedup: f64,
}

/// Speedup table over worker counts for a fixed workload.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedupTable {
    pub rows: Vec<SpeedupRow>,
}

impl SpeedupTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("workers,seconds,speedup\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{}\n", r.workers, r.seconds, r.speedup));
        }
        out
    }
}

/// Times one fixed workload (a single gradient batch processed against
/// all K expansion blocks) under each requested thread count.
///
/// The workload (seed, batches, snapshot) is identical across rows; only
/// the thread pool size changes. Speedups are ratios to the measured
/// 1-worker time, so the 1-worker row reports exactly 1.0. Each row takes
/// the fastest of three repetitions.
pub fn measure_speedup(
    dataset: &Arc<Dataset>,
    spec: &KernelSpec,
    config: &TrainConfig,
    worker_counts: &[usize],
) -> Result<SpeedupTable> {
    spec.validate()?;
    config.validate()?;
    if worker_counts.iter().any(|&w| w == 0) {
        return Err(Error::InvalidParameter("worker counts must be positive".into()));
    }
    let n = dataset.len();
    if n == 0 {
        return Err(Error::InvalidParameter("cannot measure on an empty dataset".into()));
    }
    let i_size = config.grad_batch_size.min(n);
    let j_size = config.expansion_size.min(n);
    let k = config.workers.max(1);
    let mut rng = rng_from_seed(config.seed);
    let grad_batches = partition_family(n, i_size, k, &mut rng);
    let exp_blocks = partition_family(n, j_size, k, &mut rng);
    let grad_batch = grad_batches[0].clone();
    let y: Vec<f64> = grad_batch.iter().map(|&i| dataset.label(i)).collect();
    let alpha = vec![0.0; n];
    let reg_scale = i_size as f64 / n as f64;

    let run_once = |threads: usize| -> Result<f64> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Worker(format!("thread pool: {e}")))?;
        let begin = Instant::now();
        let results: Vec<Result<(Vec<f64>, f64)>> = pool.install(|| {
            exp_blocks
                .par_iter()
                .map(|block| {
                    worker_gradient(
                        dataset, spec, &grad_batch, &y, block, &alpha, reg_scale, config.lambda,
                    )
                })
                .collect()
        });
        let elapsed = begin.elapsed().as_secs_f64();
        for r in results {
            r?;
        }
        Ok(elapsed)
    };
    let time_with = |threads: usize| -> Result<f64> {
        let mut best = f64::INFINITY;
        for _ in 0..3 {
            best = best.min(run_once(threads)?);
        }
        Ok(best)
    };

    let base = time_with(1)?;
    let mut rows = Vec::with_capacity(worker_counts.len());
    for &w in worker_counts {
        let seconds = if w == 1 { base } else { time_with(w)? };
        rows.push(SpeedupRow {
            workers: w,
            seconds,
            speedup: base / seconds,
        });
    }
    Ok(SpeedupTable { rows })
}
