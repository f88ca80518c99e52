//! Moment equations, spectra and particle validation for stochastic firing-rate networks and neural fields.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` rejects NaN on purpose

pub mod dde;
pub mod error;
pub mod export;
pub mod field;
pub mod history;
pub mod model;
pub mod network;
pub mod rng;
pub mod sigmoid;
pub mod spectral;

pub use error::{CoreError, Result};
