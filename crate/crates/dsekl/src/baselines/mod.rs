//! Comparison systems: full-batch kernel SVM, fixed-subsample expansion,
//! and random kitchen sinks.

mod batch;
mod fixed;
mod rks;

pub use batch::{train_batch, train_batch_observed, BatchConfig, FULL_GRAM_GUARD};
pub use fixed::train_fixed_subsample;
pub use rks::{rks_transform, train_rks, LinearModel, RksFeatureMap, RksModel};
