//! Bayesian dynamic factor stochastic volatility-in-mean VAR models:
//! simulation, posterior sampling, density forecasting and forecast
//! evaluation.

// `!(x > 0.0)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data_io;
pub mod dist;
pub mod error;
pub mod evaluation;
pub mod forecast;
pub mod mcmc;
pub mod model;
mod serde_matrix;
pub mod statespace;

pub use error::{Error, Result};
