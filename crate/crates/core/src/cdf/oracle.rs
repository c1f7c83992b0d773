//! Exact conditional CDF of the heteroscedastic synthetic process
//!
//! `y = x₁² + x₂x₃ + x₃x₄ + x₅ + ε + δ`, with
//! `ε = g(x₁)·(π₁(x₁)·T₃ + π₂(x₁)·Z + π₃(x₁)·(E − 1))`.
//!
//! At most two of the weights are non-zero at any `x₁`, so the noise law is
//! a scaled t₃, a scaled normal, a scaled centred exponential, a t₃ + normal
//! convolution (integrated numerically), or an exponentially modified
//! Gaussian (closed form).

use std::f64::consts::{FRAC_PI_2, PI};

use super::special::{emg_cdf, integrate, normal_cdf, student_t_cdf};
use super::{invert_by_bisection, CdfModel, ConditionalCdf};
use crate::error::{Error, Result};

/// Scale and mixture weights of the noise at a given `x₁`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseComponents {
    pub g: f64,
    pub pi: [f64; 3],
}

pub fn oracle_cdf_components(x1: f64) -> NoiseComponents {
    let d = x1 - 0.5;
    let g = 0.05 + 1.5 * d * d;
    let edge = 4.0 * d * d;
    let (p1, p3) = if x1 < 0.5 { (edge, 0.0) } else { (0.0, edge) };
    NoiseComponents {
        g,
        pi: [p1, 1.0 - p1 - p3, p3],
    }
}

/// Noiseless part of the response.
pub fn dgp_mean(x: &[f64]) -> f64 {
    x[0] * x[0] + x[1] * x[2] + x[2] * x[3] + x[4]
}

/// `t·T₃ + n·Z + e·(E − 1)` with independent components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseDistribution {
    pub t_scale: f64,
    pub normal_scale: f64,
    pub exp_scale: f64,
}

impl NoiseDistribution {
    pub fn at(x1: f64) -> Self {
        let c = oracle_cdf_components(x1);
        Self {
            t_scale: c.g * c.pi[0],
            normal_scale: c.g * c.pi[1],
            exp_scale: c.g * c.pi[2],
        }
    }

    pub fn variance(&self) -> f64 {
        3.0 * self.t_scale.powi(2) + self.normal_scale.powi(2) + self.exp_scale.powi(2)
    }

    pub fn cdf(&self, t: f64) -> f64 {
        let (a, b, c) = (self.t_scale, self.normal_scale, self.exp_scale);
        match (a > 0.0, b > 0.0, c > 0.0) {
            (true, true, false) => t3_normal_cdf(t, a, b),
            (true, false, false) => student_t_cdf(t / a, 3.0),
            (false, true, true) => emg_cdf(t, b, c),
            (false, true, false) => normal_cdf(t / b),
            (false, false, true) => {
                if t <= -c {
                    0.0
                } else {
                    -(-(t / c + 1.0)).exp_m1()
                }
            }
            _ => unreachable!("noise weights never mix all three components"),
        }
    }

    pub fn quantile(&self, u: f64) -> f64 {
        invert_by_bisection(|t| self.cdf(t), u, 0.0, self.variance().sqrt())
    }
}

/// `P(a·T₃ + b·Z ≤ t)`, integrating over `T₃ = √3·tan θ`, whose law on
/// θ ∈ (−π/2, π/2) has density `(2/π)·cos²θ`.
fn t3_normal_cdf(t: f64, a: f64, b: f64) -> f64 {
    let k = a * 3f64.sqrt();
    let integrand = |theta: f64| {
        if theta.abs() >= FRAC_PI_2 {
            return 0.0;
        }
        let c = theta.cos();
        2.0 / PI * c * c * normal_cdf((t - k * theta.tan()) / b)
    };
    // The normal CDF switches from 1 to 0 around the pivot over roughly
    // `b·cos²θ/k` radians; cut there so no panel straddles an unseen step.
    let pivot = (t / k).atan();
    let width = b * pivot.cos().powi(2) / k;
    let mut cuts = vec![-FRAC_PI_2, FRAC_PI_2];
    for m in [-64.0, -8.0, -1.0, 0.0, 1.0, 8.0, 64.0] {
        cuts.push((pivot + m * width).clamp(-FRAC_PI_2, FRAC_PI_2));
    }
    cuts.sort_by(f64::total_cmp);
    let v: f64 = cuts
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| integrate(integrand, w[0], w[1], 1e-13))
        .sum();
    v.clamp(0.0, 1.0)
}

/// Analytic conditional CDF of the synthetic process, optionally shifted
/// by `shift` in location.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OracleDgpCdf {
    pub shift: f64,
}

impl OracleDgpCdf {
    pub fn new(shift: f64) -> Self {
        Self { shift }
    }
}

#[derive(Debug, Clone, Copy)]
struct OracleConditional {
    location: f64,
    noise: NoiseDistribution,
}

impl ConditionalCdf for OracleConditional {
    fn cdf(&self, y: f64) -> f64 {
        self.noise.cdf(y - self.location)
    }

    fn quantile(&self, u: f64) -> f64 {
        self.location + self.noise.quantile(u)
    }

    fn inversion_tolerance(&self) -> f64 {
        1e-9
    }
}

impl CdfModel for OracleDgpCdf {
    fn feature_dim(&self) -> usize {
        5
    }

    fn conditional_unchecked<'a>(&'a self, x: &[f64]) -> Result<Box<dyn ConditionalCdf + 'a>> {
        if !(0.0..=1.0).contains(&x[0]) {
            return Err(Error::OutOfRange {
                name: "x1",
                value: x[0],
                allowed: "[0, 1]",
            });
        }
        Ok(Box::new(OracleConditional {
            location: dgp_mean(x) + self.shift,
            noise: NoiseDistribution::at(x[0]),
        }))
    }

    fn name(&self) -> &'static str {
        "oracle"
    }
}
