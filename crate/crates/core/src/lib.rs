//! Bayesian MAP thresholding for sparse normal means.
//!
//! Observe `y = mu + sigma z` with `mu` sparse. A hierarchical prior on the
//! number of nonzero means, their location and their size yields a posterior
//! mode that is a hard-threshold estimator with a data-driven threshold. The
//! crate provides the prior diagnostics, the estimator, classical threshold
//! baselines, an EM fit of the hyperparameters and a Monte Carlo risk bench.

pub mod baselines;
pub mod cli;
pub mod em;
pub mod error;
pub mod map;
pub mod prior;
pub mod risk;
pub mod special;

pub use error::{Error, Result};
