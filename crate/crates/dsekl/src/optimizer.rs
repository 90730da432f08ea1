//! Serial doubly stochastic training loop.
//!
//! Each iteration draws a gradient batch of I row indices and an expansion
//! batch of J coefficient indices, materializes only the I x J kernel
//! block, and moves the J sampled coefficients along the block subgradient.
//! Peak per-iteration memory is O(I*J + N) regardless of dataset size.

use std::sync::Arc;
use std::time::Instant;

use rand_chacha::ChaCha8Rng;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernel::{gram_block, KernelSpec};
use crate::model::{DecisionModel, DualModel};
use crate::objective::block_gradient_with_loss;
use crate::rng::rng_from_seed;

/// Learning-rate schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepSchedule {
    /// eta_t = eta0 / t, t counting iterations from 1.
    InverseIter,
    /// eta_e = eta0 / e, e counting epochs from 1.
    InverseEpoch,
}

impl StepSchedule {
    #[inline]
    pub(crate) fn eta(&self, eta0: f64, t: u64, epoch: u64) -> f64 {
        match self {
            StepSchedule::InverseIter => eta0 / t as f64,
            StepSchedule::InverseEpoch => eta0 / epoch as f64,
        }
    }
}

/// Hyperparameters shared by the serial and parallel trainers.
///
/// `dampening` and `fixed_blocks` only affect [`crate::parallel::train_parallel`]:
/// the former toggles the adaptive per-coordinate step damping, the latter
/// freezes the index partition of the first sweep for the whole run instead
/// of resampling it.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub grad_batch_size: usize,
    pub expansion_size: usize,
    pub lambda: f64,
    pub step_schedule: StepSchedule,
    pub eta0: f64,
    pub max_epochs: usize,
    /// Stop once the L2 norm of the alpha change over one epoch falls below
    /// this; 0 disables the rule.
    pub stop_weight_delta: f64,
    pub seed: u64,
    pub workers: usize,
    pub dampening: bool,
    pub fixed_blocks: bool,
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        TrainConfig {
            grad_batch_size: 50,
            expansion_size: 20,
            lambda: 1e-2,
            step_schedule: StepSchedule::InverseIter,
            eta0: 1.0,
            max_epochs: 100,
            stop_weight_delta: 0.0,
            seed: 0,
            workers: 1,
            dampening: true,
            fixed_blocks: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grad_batch_size == 0 || self.expansion_size == 0 {
            return Err(Error::InvalidParameter(
                "batch sizes I and J must be at least 1".into(),
            ));
        }
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "lambda must be positive and finite, got {}",
                self.lambda
            )));
        }
        if !(self.eta0 > 0.0) || !self.eta0.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "eta0 must be positive and finite, got {}",
                self.eta0
            )));
        }
        if self.stop_weight_delta < 0.0 || !self.stop_weight_delta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "stop_weight_delta must be non-negative, got {}",
                self.stop_weight_delta
            )));
        }
        if self.workers == 0 {
            return Err(Error::InvalidParameter("workers must be at least 1".into()));
        }
        Ok(())
    }
}

/// One metrics snapshot during training.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub iteration: u64,
    /// Fraction of one data pass completed, in units of N gradient samples.
    pub epoch: f64,
    /// Scaled stochastic objective estimate; per-iteration checkpoints use
    /// the current block, epoch checkpoints the mean over the epoch.
    pub objective_estimate: f64,
    /// Misclassification rate on the validation set, when one was given.
    pub validation_error: Option<f64>,
    pub elapsed_seconds: f64,
    /// True for the end-of-epoch snapshots, which can share an iteration
    /// number with the early per-iteration ones.
    pub is_epoch_end: bool,
}

/// Metric trace of one training run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunRecord {
    pub checkpoints: Vec<Checkpoint>,
    pub iterations: u64,
    pub final_epoch: f64,
    pub stopped_early: bool,
    /// Largest kernel-block allocation of the run, in f64 entries.
    pub peak_block_entries: usize,
    pub total_seconds: f64,
}

impl RunRecord {
    /// CSV rendering, one checkpoint per row. Missing validation errors
    /// render as empty fields.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "iteration,epoch,objective_estimate,validation_error,elapsed_seconds,epoch_end\n",
        );
        for c in &self.checkpoints {
            let v = c
                .validation_error
                .map(|e| e.to_string())
                .unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                c.iteration,
                c.epoch,
                c.objective_estimate,
                v,
                c.elapsed_seconds,
                c.is_epoch_end as u8
            ));
        }
        out
    }

    pub fn last_validation_error(&self) -> Option<f64> {
        self.checkpoints.iter().rev().find_map(|c| c.validation_error)
    }

    /// Objective estimates of the end-of-epoch checkpoints, in epoch order.
    pub fn epoch_objectives(&self) -> Vec<f64> {
        self.checkpoints
            .iter()
            .filter(|c| c.is_epoch_end)
            .map(|c| c.objective_estimate)
            .collect()
    }
}

/// Draws `size` distinct indices from [0, n) uniformly at random.
///
/// `size >= n` returns the full index set in natural order without touching
/// the generator, so a full-index "sample" leaves the random stream exactly
/// where it was. That makes degenerate configurations (I = J = N) line up
/// with deterministic full-batch sweeps.
pub fn sample_indices(n: usize, size: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    if size >= n {
        return (0..n).collect();
    }
    rand::seq::index::sample(rng, n, size).into_vec()
}

/// L2 norm of the elementwise difference.
fn l2_delta(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Algorithm: doubly stochastic serial training. See the module docs.
///
/// Labels are guaranteed binary by [`Dataset`] construction. Aborts with a
/// diagnostic if a gradient turns non-finite.
pub fn train_serial(
    dataset: &Arc<Dataset>,
    spec: &KernelSpec,
    config: &TrainConfig,
    validation: Option<&Dataset>,
) -> Result<(DualModel, RunRecord)> {
    train_serial_observed(dataset, spec, config, validation, |_, _| {})
}

/// [`train_serial`] with a per-iteration observer receiving the iteration
/// counter and the updated coefficient vector; used by equivalence oracles.
pub fn train_serial_observed(
    dataset: &Arc<Dataset>,
    spec: &KernelSpec,
    config: &TrainConfig,
    validation: Option<&Dataset>,
    observer: impl FnMut(u64, &[f64]),
) -> Result<(DualModel, RunRecord)> {
    train_loop(dataset, spec, config, validation, None, observer)
}

/// Shared serial loop. `fixed_subset` switches the expansion sampling off:
/// a set of that size is drawn once up front and reused every iteration,
/// which is the fixed-subsample baseline.
pub(crate) fn train_loop(
    dataset: &Arc<Dataset>,
    spec: &KernelSpec,
    config: &TrainConfig,
    validation: Option<&Dataset>,
    fixed_subset: Option<usize>,
    mut observer: impl FnMut(u64, &[f64]),
) -> Result<(DualModel, RunRecord)> {
    spec.validate()?;
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::InvalidParameter("cannot train on an empty dataset".into()));
    }
    if fixed_subset == Some(0) {
        return Err(Error::InvalidParameter("fixed subset size must be at least 1".into()));
    }
    let n = dataset.len();
    let i_size = config.grad_batch_size.min(n);
    let j_size = fixed_subset.unwrap_or(config.expansion_size).min(n);
    let iters_per_epoch = n.div_ceil(i_size);
    let reg_scale = i_size as f64 / n as f64;
    let obj_grad_scale = n as f64 / i_size as f64;
    let obj_reg_scale = n as f64 / j_size as f64;

    let mut rng = rng_from_seed(config.seed);
    let frozen_expansion = fixed_subset.map(|_| sample_indices(n, j_size, &mut rng));
    let mut model = DualModel::zeros(dataset.clone(), *spec)?;
    let start = Instant::now();
    let mut record = RunRecord {
        peak_block_entries: i_size * j_size,
        ..RunRecord::default()
    };
    let val_err = |m: &DualModel| -> Result<Option<f64>> {
        validation.map(|v| m.error_rate(v)).transpose()
    };
    record.checkpoints.push(Checkpoint {
        iteration: 0,
        epoch: 0.0,
        // at alpha = 0 every margin is violated by exactly 1
        objective_estimate: n as f64,
        validation_error: val_err(&model)?,
        elapsed_seconds: start.elapsed().as_secs_f64(),
        is_epoch_end: false,
    });

    let mut t: u64 = 0;
    let mut epoch_start_alpha = model.alpha().to_vec();
    for epoch in 1..=config.max_epochs {
        let mut epoch_obj_sum = 0.0;
        for _ in 0..iters_per_epoch {
            t += 1;
            let grad_batch = sample_indices(n, i_size, &mut rng);
            let fresh;
            let exp_batch: &[usize] = match &frozen_expansion {
                Some(j) => j,
                None => {
                    fresh = sample_indices(n, j_size, &mut rng);
                    &fresh
                }
            };
            let k = gram_block(dataset, &grad_batch, exp_batch, spec)?;
            let y: Vec<f64> = grad_batch.iter().map(|&i| dataset.label(i)).collect();
            let alpha_j: Vec<f64> = exp_batch.iter().map(|&j| model.alpha()[j]).collect();
            let (g, hinge_sum) =
                block_gradient_with_loss(&k, &y, &alpha_j, reg_scale, config.lambda);
            if let Some(bad) = g.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteGradient {
                    iteration: t,
                    detail: format!(
                        "gradient coordinate {} (expansion index {}) is {}",
                        bad, exp_batch[bad], g[bad]
                    ),
                });
            }
            let eta = config.step_schedule.eta(config.eta0, t, epoch as u64);
            let alpha = model.alpha_mut();
            for (bj, &j) in exp_batch.iter().enumerate() {
                alpha[j] -= eta * g[bj];
            }
            observer(t, model.alpha());

            let sq_j: f64 = alpha_j.iter().map(|a| a * a).sum();
            let obj = obj_grad_scale * hinge_sum + config.lambda * obj_reg_scale * sq_j;
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
        let delta = l2_delta(model.alpha(), &epoch_start_alpha);
        epoch_start_alpha.copy_from_slice(model.alpha());
        if delta < config.stop_weight_delta {
            record.stopped_early = true;
            break;
        }
    }
    record.iterations = t;
    record.final_epoch = (t * i_size as u64) as f64 / n as f64;
    record.total_seconds = start.elapsed().as_secs_f64();
    Ok((model, record))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::generate_xor;

    fn xor_dataset(n: usize, seed: u64) -> Arc<Dataset> {
        Arc::new(generate_xor(n, &mut rng_from_seed(seed)))
    }

    fn xor_config() -> TrainConfig {
        TrainConfig {
            grad_batch_size: 50,
            expansion_size: 20,
            lambda: 1e-2,
            eta0: 1.0,
            max_epochs: 30,
            seed: 7,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn full_set_sample_is_natural_order() {
        let mut rng = rng_from_seed(3);
        assert_eq!(sample_indices(5, 5, &mut rng), vec![0, 1, 2, 3, 4]);
        assert_eq!(sample_indices(1, 1, &mut rng), vec![0]);
        assert_eq!(sample_indices(3, 10, &mut rng), vec![0, 1, 2]);
    }

    #[test]
    fn full_set_sample_leaves_rng_untouched() {
        let mut a = rng_from_seed(9);
        let mut b = rng_from_seed(9);
        let _ = sample_indices(7, 7, &mut a);
        assert_eq!(sample_indices(100, 5, &mut a), sample_indices(100, 5, &mut b));
    }

    #[test]
    fn sample_is_distinct_and_in_range() {
        let mut rng = rng_from_seed(17);
        let s = sample_indices(100, 30, &mut rng);
        assert_eq!(s.len(), 30);
        let mut sorted = s.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 30);
        assert!(s.iter().all(|&i| i < 100));
    }

    #[test]
    fn sample_deterministic_under_seed() {
        let a = sample_indices(100, 10, &mut rng_from_seed(5));
        let b = sample_indices(100, 10, &mut rng_from_seed(5));
        assert_eq!(a, b);
    }

    #[test]
    fn zero_epochs_returns_zero_model() {
        let data = xor_dataset(60, 1);
        let mut config = xor_config();
        config.max_epochs = 0;
        let spec = KernelSpec::rbf(1.0).unwrap();
        let (model, record) =
            train_serial(&data, &spec, &config, Some(data.as_ref())).unwrap();
        assert!(model.alpha().iter().all(|&a| a == 0.0));
        assert_eq!(record.iterations, 0);
        // sign(0) predicts +1, so the error is the share of -1 labels
        let (_, neg) = data.class_counts();
        let expect = neg as f64 / data.len() as f64;
        let got = record.checkpoints[0].validation_error.unwrap();
        assert!((got - expect).abs() < 1e-12);
    }

    #[test]
    fn training_is_bitwise_deterministic() {
        let data = xor_dataset(80, 2);
        let spec = KernelSpec::rbf(1.0).unwrap();
        let config = xor_config();
        let (m1, _) = train_serial(&data, &spec, &config, None).unwrap();
        let (m2, _) = train_serial(&data, &spec, &config, None).unwrap();
        assert_eq!(m1.alpha(), m2.alpha());
    }

    #[test]
    fn validation_tracking_does_not_change_trajectory() {
        let data = xor_dataset(80, 3);
        let spec = KernelSpec::rbf(1.0).unwrap();
        let config = xor_config();
        let (with_val, _) = train_serial(&data, &spec, &config, Some(data.as_ref())).unwrap();
        let (without, _) = train_serial(&data, &spec, &config, None).unwrap();
        assert_eq!(with_val.alpha(), without.alpha());
    }

    #[test]
    fn one_iteration_touches_only_sampled_coordinates() {
        let data = xor_dataset(100, 4);
        let spec = KernelSpec::rbf(1.0).unwrap();
        let config = TrainConfig {
            grad_batch_size: 100, // one iteration per epoch
            expansion_size: 5,
            max_epochs: 1,
            seed: 11,
            ..TrainConfig::default()
        };
        let (model, record) = train_serial(&data, &spec, &config, None).unwrap();
        assert_eq!(record.iterations, 1);
        let moved = model.alpha().iter().filter(|&&a| a != 0.0).count();
        assert!(moved <= 5, "{moved} coordinates moved, expected at most 5");
        assert!(moved > 0, "no coordinate moved at all");
    }

    #[test]
    fn xor_training_reduces_error_and_objective() {
        let data = xor_dataset(100, 5);
        let test = xor_dataset(400, 6);
        let spec = KernelSpec::rbf(1.0).unwrap();
        let config = xor_config();
        let (model, record) = train_serial(&data, &spec, &config, Some(test.as_ref())).unwrap();
        let err = model.error_rate(&test).unwrap();
        assert!(err < 0.25, "XOR test error {err} did not drop");
        // epoch-mean objective: epoch 10 strictly below epoch 1
        let epoch_objs = record.epoch_objectives();
        assert!(epoch_objs.len() >= 10);
        assert!(
            epoch_objs[9] < epoch_objs[0],
            "epoch 10 objective {} not below epoch 1 objective {}",
            epoch_objs[9],
            epoch_objs[0]
        );
    }

    #[test]
    fn stop_rule_halts_after_first_epoch() {
        let data = xor_dataset(60, 8);
        let spec = KernelSpec::rbf(1.0).unwrap();
        let config = TrainConfig {
            stop_weight_delta: 1e9,
            max_epochs: 50,
            ..xor_config()
        };
        let (_, record) = train_serial(&data, &spec, &config, None).unwrap();
        assert!(record.stopped_early);
        // N = 60, I = 50: one epoch is ceil(60/50) = 2 iterations
        assert_eq!(record.iterations, 2);
    }

    #[test]
    fn peak_block_memory_is_clamped_product() {
        let data = xor_dataset(80, 9);
        let spec = KernelSpec::rbf(1.0).unwrap();
        let config = TrainConfig {
            grad_batch_size: 1000,
            expansion_size: 30,
            max_epochs: 1,
            ..TrainConfig::default()
        };
        let (_, record) = train_serial(&data, &spec, &config, None).unwrap();
        // I clamps to N = 80
        assert_eq!(record.peak_block_entries, 80 * 30);
        assert!(record.peak_block_entries < 80 * 80);
    }

    #[test]
    fn schedules_differ_in_trajectory() {
        let data = xor_dataset(60, 10);
        let spec = KernelSpec::rbf(1.0).unwrap();
        let a = TrainConfig {
            step_schedule: StepSchedule::InverseIter,
            ..xor_config()
        };
        let b = TrainConfig {
            step_schedule: StepSchedule::InverseEpoch,
            ..xor_config()
        };
        let (m1, _) = train_serial(&data, &spec, &a, None).unwrap();
        let (m2, _) = train_serial(&data, &spec, &b, None).unwrap();
        assert_ne!(m1.alpha(), m2.alpha());
    }

    #[test]
    fn observer_sees_every_iteration() {
        let data = xor_dataset(50, 12);
        let spec = KernelSpec::rbf(1.0).unwrap();
        let config = TrainConfig {
            grad_batch_size: 25,
            max_epochs: 3,
            ..xor_config()
        };
        let mut seen = Vec::new();
        let _ = train_serial_observed(&data, &spec, &config, None, |t, alpha| {
            seen.push((t, alpha.to_vec()));
        })
        .unwrap();
        // 50 / 25 = 2 iterations per epoch, 3 epochs
        assert_eq!(seen.len(), 6);
        assert_eq!(seen.last().unwrap().0, 6);
    }

    #[test]
    fn run_record_csv_has_header_and_rows() {
        let data = xor_dataset(40, 13);
        let spec = KernelSpec::rbf(1.0).unwrap();
        let mut config = xor_config();
        config.max_epochs = 2;
        let (_, record) = train_serial(&data, &spec, &config, Some(data.as_ref())).unwrap();
        let csv = record.to_csv();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "iteration,epoch,objective_estimate,validation_error,elapsed_seconds,epoch_end"
        );
        assert_eq!(lines.count(), record.checkpoints.len());
    }
}
