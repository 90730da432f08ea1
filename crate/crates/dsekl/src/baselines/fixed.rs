//! Fixed-random-subsample baseline: the expansion set is drawn once and
//! frozen, so only the gradient indices stay stochastic.

use std::sync::Arc;

use crate::data::Dataset;
use crate::error::Result;
use crate::kernel::KernelSpec;
use crate::model::DualModel;
use crate::optimizer::{train_loop, RunRecord, TrainConfig};

/// Trains with a single expansion subset of `subset_size` landmarks drawn
/// up front. The loop is otherwise identical to the serial trainer, and
/// the returned coefficients are supported only on the frozen subset.
/// `config.expansion_size` is ignored in favor of `subset_size`.
pub fn train_fixed_subsample(
    dataset: &Arc<Dataset>,
    spec: &KernelSpec,
    config: &TrainConfig,
    subset_size: usize,
    validation: Option<&Dataset>,
) -> Result<(DualModel, RunRecord)> {
    train_loop(dataset, spec, config, validation, Some(subset_size), |_, _| {})
}
