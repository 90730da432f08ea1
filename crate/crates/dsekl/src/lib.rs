//! Doubly stochastic empirical kernel learning.
//!
//! Trains kernel SVMs without ever materializing the full Gram matrix:
//! every iteration samples a set of gradient points and a set of expansion
//! points, evaluates only that rectangular kernel block, and updates the
//! sampled dual coefficients. A shared-memory parallel variant splits the
//! expansion coordinates across workers with AdaGrad-style dampening.
//!
//! The crate also ships the comparison baselines (random kitchen sinks, a
//! fixed expansion subsample, and a full-batch solver) plus data loading,
//! grid search, and speedup measurement used by the benchmark CLI.

pub mod baselines;
pub mod data;
pub mod error;
pub mod kernel;
pub mod model;
pub mod model_selection;
pub mod objective;
pub mod optimizer;
pub mod parallel;
pub mod rng;

pub use baselines::{
    rks_transform, train_batch, train_fixed_subsample, train_rks, BatchConfig, LinearModel,
    RksFeatureMap, RksModel, FULL_GRAM_GUARD,
};
pub use data::{generate_xor, Dataset, SparseRow};
pub use error::{Error, Result};
pub use kernel::{eval_kernel, gram_block, GramBlock, KernelFamily, KernelSpec};
pub use model::{load_model, save_model, DecisionModel, DualModel};
pub use model_selection::{
    dsekl_trainer, grid_search, log_grid, two_fold_split, CvRow, CvTable, GridPoint, SearchSpace,
};
pub use objective::{objective_value, subgradient, SparseGradient};
pub use optimizer::{
    sample_indices, train_serial, train_serial_observed, Checkpoint, RunRecord, StepSchedule,
    TrainConfig,
};
pub use parallel::{
    measure_speedup, partition_batches, train_parallel, DampeningAccumulator, SpeedupRow,
    SpeedupTable,
};
pub use rng::{derive_seed, rng_from_seed};
