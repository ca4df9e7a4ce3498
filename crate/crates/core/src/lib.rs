//! Customer lifetime value modelling on transaction logs.
//!
//! The crate bundles:
//!
//! * [`ingest`]: transaction-log parsing, RFM summaries, cohort dummies and
//!   holdout revenue.
//! * [`numerics`]: special functions, Gamma sampling and implicit
//!   reparameterization gradients.
//! * [`grad`]: a small reverse-mode differentiation tape with Adam.
//! * [`baseline`]: maximum-likelihood Pareto/NBD and Gamma-Gamma models.
//! * [`model`]: the variational autoencoder whose decoder likelihood is the
//!   Pareto/NBD + Gamma-Gamma process.
//! * [`predict`]: Monte Carlo simulation of customer futures.
//! * [`eval`]: metrics, synthetic data and the benchmark runner.

pub mod baseline;
pub mod error;
pub mod eval;
pub mod grad;
pub mod ingest;
pub mod model;
pub mod numerics;
pub mod predict;
pub mod rng;

pub use error::{Error, Result};

/// Days per model time unit (weeks).
pub const DAYS_PER_WEEK: f64 = 7.0;
