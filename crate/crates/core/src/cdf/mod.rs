//! Conditional CDF models and their quantile inverses.

mod analytic;
mod hazard;
mod oracle;
pub mod special;

pub use analytic::{BetaCdf, GaussianCdf, UniformCdf};
pub use hazard::{fit_hazard_cdf, HazardCdf, HazardConditional, DEFAULT_BINS, GRID_MARGIN};
pub use oracle::{dgp_mean, oracle_cdf_components, NoiseComponents, NoiseDistribution, OracleDgpCdf};

use crate::error::{Error, Result};
use crate::tensor_nn::Matrix;

/// The distribution of `Y` at one fixed covariate value.
pub trait ConditionalCdf {
    /// Nondecreasing in `y`, valued in `[0, 1]`.
    fn cdf(&self, y: f64) -> f64;

    /// Generalized inverse for `u` in `[0, 1]`.
    fn quantile(&self, u: f64) -> f64;

    /// Largest round-trip error `|cdf(quantile(u)) − u|` the model permits.
    fn inversion_tolerance(&self) -> f64;
}

/// Anything exposing an estimate of `F(y | x)` and its inverse.
pub trait CdfModel: Send + Sync {
    fn feature_dim(&self) -> usize;

    /// Conditional distribution at `x`. Implementations may assume
    /// `x.len() == feature_dim()`.
    fn conditional_unchecked<'a>(&'a self, x: &[f64]) -> Result<Box<dyn ConditionalCdf + 'a>>;

    fn conditional<'a>(&'a self, x: &[f64]) -> Result<Box<dyn ConditionalCdf + 'a>> {
        if x.len() != self.feature_dim() {
            return Err(Error::DimensionMismatch {
                context: "CdfModel feature vector",
                expected: self.feature_dim(),
                actual: x.len(),
            });
        }
        self.conditional_unchecked(x)
    }

    /// One conditional per row of `x`.
    fn conditionals<'a>(&'a self, x: &Matrix) -> Result<Vec<Box<dyn ConditionalCdf + 'a>>> {
        (0..x.rows()).map(|i| self.conditional(x.row(i))).collect()
    }

    fn name(&self) -> &'static str;
}

/// `F(y | x)`; `y = −∞` gives 0 and `y = +∞` gives 1.
pub fn cdf_eval(model: &dyn CdfModel, y: f64, x: &[f64]) -> Result<f64> {
    if y.is_nan() {
        return Err(Error::OutOfRange {
            name: "y",
            value: y,
            allowed: "a number",
        });
    }
    let cond = model.conditional(x)?;
    Ok(if y == f64::NEG_INFINITY {
        0.0
    } else if y == f64::INFINITY {
        1.0
    } else {
        cond.cdf(y).clamp(0.0, 1.0)
    })
}

pub fn check_level(u: f64) -> Result<()> {
    if (0.0..=1.0).contains(&u) {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name: "u",
            value: u,
            allowed: "[0, 1]",
        })
    }
}

/// `Q(u | x)`, the generalized inverse of [`cdf_eval`].
pub fn quantile_eval(model: &dyn CdfModel, u: f64, x: &[f64]) -> Result<f64> {
    check_level(u)?;
    Ok(model.conditional(x)?.quantile(u))
}

/// Generalized inverse by bisection for continuous, strictly increasing CDFs.
pub(crate) fn invert_by_bisection<F: Fn(f64) -> f64>(cdf: F, u: f64, centre: f64, scale: f64) -> f64 {
    if u <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if u >= 1.0 {
        return f64::INFINITY;
    }
    let mut step = scale.max(1e-12);
    let mut lo = centre - step;
    while cdf(lo) >= u {
        step *= 2.0;
        lo = centre - step;
    }
    step = scale.max(1e-12);
    let mut hi = centre + step;
    while cdf(hi) < u {
        step *= 2.0;
        hi = centre + step;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if cdf(mid) >= u {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}
