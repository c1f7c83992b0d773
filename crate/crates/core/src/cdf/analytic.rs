//! Closed-form conditional CDFs used as oracles and in tests.

use statrs::function::beta::beta_reg;

use super::special::{normal_cdf, normal_quantile};
use super::{invert_by_bisection, CdfModel, ConditionalCdf};
use crate::error::{Error, Result};

/// `Y | x ~ Beta(a, b)` regardless of `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaCdf {
    pub a: f64,
    pub b: f64,
    pub dim: usize,
}

impl BetaCdf {
    pub fn new(a: f64, b: f64, dim: usize) -> Result<Self> {
        if !(a > 0.0 && b > 0.0) {
            return Err(Error::config("beta", "shape parameters must be positive"));
        }
        Ok(Self { a, b, dim })
    }

    pub fn cdf_at(&self, y: f64) -> f64 {
        if y <= 0.0 {
            0.0
        } else if y >= 1.0 {
            1.0
        } else if self.b == 1.0 {
            y.powf(self.a)
        } else if self.a == 1.0 {
            1.0 - (1.0 - y).powf(self.b)
        } else {
            beta_reg(self.a, self.b, y)
        }
    }

    pub fn quantile_at(&self, u: f64) -> f64 {
        if u <= 0.0 {
            0.0
        } else if u >= 1.0 {
            1.0
        } else if self.b == 1.0 {
            u.powf(1.0 / self.a)
        } else if self.a == 1.0 {
            1.0 - (1.0 - u).powf(1.0 / self.b)
        } else {
            invert_by_bisection(|y| self.cdf_at(y), u, 0.5, 0.25).clamp(0.0, 1.0)
        }
    }
}

impl ConditionalCdf for BetaCdf {
    fn cdf(&self, y: f64) -> f64 {
        self.cdf_at(y)
    }

    fn quantile(&self, u: f64) -> f64 {
        self.quantile_at(u)
    }

    fn inversion_tolerance(&self) -> f64 {
        1e-9
    }
}

impl CdfModel for BetaCdf {
    fn feature_dim(&self) -> usize {
        self.dim
    }

    fn conditional_unchecked<'a>(&'a self, _x: &[f64]) -> Result<Box<dyn ConditionalCdf + 'a>> {
        Ok(Box::new(*self))
    }

    fn name(&self) -> &'static str {
        "beta"
    }
}

/// `Y | x ~ Uniform(lo, hi)` regardless of `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformCdf {
    pub lo: f64,
    pub hi: f64,
    pub dim: usize,
}

impl ConditionalCdf for UniformCdf {
    fn cdf(&self, y: f64) -> f64 {
        ((y - self.lo) / (self.hi - self.lo)).clamp(0.0, 1.0)
    }

    fn quantile(&self, u: f64) -> f64 {
        self.lo + u.clamp(0.0, 1.0) * (self.hi - self.lo)
    }

    fn inversion_tolerance(&self) -> f64 {
        1e-12
    }
}

impl CdfModel for UniformCdf {
    fn feature_dim(&self) -> usize {
        self.dim
    }

    fn conditional_unchecked<'a>(&'a self, _x: &[f64]) -> Result<Box<dyn ConditionalCdf + 'a>> {
        Ok(Box::new(*self))
    }

    fn name(&self) -> &'static str {
        "uniform"
    }
}

/// Normal location-scale model with linear mean and log-linear scale:
/// `Y | x ~ N(m₀ + m·x, exp(s₀ + s·x)²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianCdf {
    pub mean_intercept: f64,
    pub mean_coef: Vec<f64>,
    pub log_sd_intercept: f64,
    pub log_sd_coef: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
struct Normal {
    mean: f64,
    sd: f64,
}

impl ConditionalCdf for Normal {
    fn cdf(&self, y: f64) -> f64 {
        normal_cdf((y - self.mean) / self.sd)
    }

    fn quantile(&self, u: f64) -> f64 {
        self.mean + self.sd * normal_quantile(u)
    }

    fn inversion_tolerance(&self) -> f64 {
        1e-12
    }
}

impl GaussianCdf {
    pub fn homoscedastic(mean: f64, sd: f64, dim: usize) -> Self {
        Self {
            mean_intercept: mean,
            mean_coef: vec![0.0; dim],
            log_sd_intercept: sd.ln(),
            log_sd_coef: vec![0.0; dim],
        }
    }

    pub fn mean_and_sd(&self, x: &[f64]) -> (f64, f64) {
        let dot = |c: &[f64]| c.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        (
            self.mean_intercept + dot(&self.mean_coef),
            (self.log_sd_intercept + dot(&self.log_sd_coef)).exp(),
        )
    }
}

impl CdfModel for GaussianCdf {
    fn feature_dim(&self) -> usize {
        self.mean_coef.len()
    }

    fn conditional_unchecked<'a>(&'a self, x: &[f64]) -> Result<Box<dyn ConditionalCdf + 'a>> {
        let (mean, sd) = self.mean_and_sd(x);
        Ok(Box::new(Normal { mean, sd }))
    }

    fn name(&self) -> &'static str {
        "gaussian"
    }
}
