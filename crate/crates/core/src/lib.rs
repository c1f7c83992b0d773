//! Conformalized percentile intervals.
//!
//! Calibration happens in probability-integral-transform space: calibration
//! responses are mapped through an estimated conditional CDF, lower and upper
//! PIT cutoffs are picked as independent order statistics, and the cutoffs
//! are mapped back through the estimated conditional quantile function at the
//! test covariate. The crate ships the conditional-CDF estimators, the
//! symmetric-score (DCP), residual, rescaled and CQR baselines, a synthetic
//! data generator and the replication harness behind the `cpi` binary.

pub mod baselines;
pub mod cdf;
pub mod conformal;
pub mod datapipe;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod rng;
pub mod synth;
pub mod tensor_nn;

pub use error::{Error, Result};
