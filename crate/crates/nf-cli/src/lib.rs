//! Experiment runner behind the `nf` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` rejects NaN on purpose

pub mod config;
pub mod error;
pub mod manifest;
pub mod presets;
pub mod run;

pub use config::ExperimentConfig;
pub use error::CliError;
