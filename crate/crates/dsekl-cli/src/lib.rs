//! Library side of the benchmark CLI: experiment configuration,
//! experiment protocols, and report types. The `dsekl` binary is a thin
//! argument-parsing layer over this.

pub mod config;
pub mod experiments;
pub mod report;
