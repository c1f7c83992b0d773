//! Synthetic data: the heteroscedastic five-covariate process, its
//! location-shifted variant, and direct Beta PIT draws.

use rand::Rng as _;
use rand_distr::{Beta, Distribution, Exp1, Open01, Poisson, StandardNormal};

use crate::cdf::{dgp_mean, oracle_cdf_components};
use crate::datapipe::Dataset;
use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, Rng};
use crate::tensor_nn::Matrix;

pub const DGP_DIM: usize = 5;
pub const DGP_COLUMNS: [&str; DGP_DIM] = ["x1", "x2", "x3", "x4", "x5"];
pub const X2_BOUND: f64 = 3.0;
pub const X5_MAX: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DgpSample {
    pub x: [f64; DGP_DIM],
    pub y: f64,
    /// Scaled noise `g(x₁)·Σ πₖDₖ`.
    pub eps: f64,
    /// Noiseless mean part.
    pub f: f64,
}

/// Draws `x₂ … x₅`; `x₁` is left at zero.
fn sample_tail_covariates(rng: &mut Rng) -> [f64; DGP_DIM] {
    let x2 = loop {
        let v: f64 = rng.sample(StandardNormal);
        if v.abs() <= X2_BOUND {
            break v;
        }
    };
    let arcsine = Beta::new(0.5, 0.5).expect("valid beta parameters");
    let x3 = arcsine.sample(rng);
    let x4 = if rng.random_bool(0.5) { 1.0 } else { 0.0 };
    let pois = Poisson::new(2.0).expect("valid poisson rate");
    let x5 = loop {
        let v: f64 = pois.sample(rng);
        if v <= X5_MAX {
            break v;
        }
    };
    [0.0, x2, x3, x4, x5]
}

/// `g(x₁)·(π₁T₃ + π₂Z + π₃(E − 1))`. All three draws are always taken so
/// the random stream does not depend on `x₁`.
pub fn sample_noise(x1: f64, rng: &mut Rng) -> f64 {
    let c = oracle_cdf_components(x1);
    let num: f64 = rng.sample(StandardNormal);
    let chi2: f64 = (0..3).map(|_| rng.sample::<f64, _>(StandardNormal).powi(2)).sum();
    let t3 = num / (chi2 / 3.0).sqrt();
    let z: f64 = rng.sample(StandardNormal);
    let e: f64 = rng.sample(Exp1);
    c.g * (c.pi[0] * t3 + c.pi[1] * z + c.pi[2] * (e - 1.0))
}

fn sample_at(x1: f64, delta: f64, rng: &mut Rng) -> DgpSample {
    let mut x = sample_tail_covariates(rng);
    x[0] = x1;
    let f = dgp_mean(&x);
    let eps = sample_noise(x1, rng);
    DgpSample { x, y: f + eps + delta, eps, f }
}

pub fn sample_dgp_records(n: usize, delta: f64, seed: u64) -> Vec<DgpSample> {
    let mut rng = rng_from_seed(seed);
    (0..n)
        .map(|_| {
            let x1: f64 = rng.random();
            sample_at(x1, delta, &mut rng)
        })
        .collect()
}

/// One record per entry of `x1s`, with the other covariates and noise drawn fresh.
pub fn sample_dgp_records_at(x1s: &[f64], delta: f64, seed: u64) -> Vec<DgpSample> {
    let mut rng = rng_from_seed(seed);
    x1s.iter().map(|&x1| sample_at(x1, delta, &mut rng)).collect()
}

pub fn records_to_dataset(records: &[DgpSample], source: &str) -> Result<Dataset> {
    if records.is_empty() {
        return Err(Error::EmptyData("synthetic sample"));
    }
    let x: Vec<f64> = records.iter().flat_map(|r| r.x).collect();
    let y = records.iter().map(|r| r.y).collect();
    let mut d = Dataset::new(Matrix::from_vec(records.len(), DGP_DIM, x)?, y, source)?;
    d.column_names = Some(DGP_COLUMNS.iter().map(|s| s.to_string()).collect());
    Ok(d)
}

/// `n` draws from the process with response shifted by `delta`.
pub fn sample_dgp(n: usize, delta: f64, seed: u64) -> Result<Dataset> {
    records_to_dataset(&sample_dgp_records(n, delta, seed), "dgp")
}

pub fn sample_dgp_at_x1(x1s: &[f64], delta: f64, seed: u64) -> Result<Dataset> {
    records_to_dataset(&sample_dgp_records_at(x1s, delta, seed), "dgp-fixed-x1")
}

/// `Var(ε | x₁) = g²(3π₁² + π₂² + π₃²)`.
pub fn noise_variance(x1: f64) -> f64 {
    let c = oracle_cdf_components(x1);
    c.g * c.g * (3.0 * c.pi[0].powi(2) + c.pi[1].powi(2) + c.pi[2].powi(2))
}

/// `n` i.i.d. Beta(a, b) values in (0, 1). When either shape is 1 the
/// draws use the closed-form inverse CDF.
pub fn sample_beta_pits(n: usize, a: f64, b: f64, seed: u64) -> Result<Vec<f64>> {
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(Error::config("beta shape", format!("need a, b > 0, got ({a}, {b})")));
    }
    let mut rng = rng_from_seed(seed);
    Ok(if b == 1.0 {
        (0..n).map(|_| rng.sample::<f64, _>(Open01).powf(1.0 / a)).collect()
    } else if a == 1.0 {
        (0..n).map(|_| 1.0 - rng.sample::<f64, _>(Open01).powf(1.0 / b)).collect()
    } else {
        let dist = Beta::new(a, b).map_err(|e| Error::config("beta shape", e.to_string()))?;
        (0..n).map(|_| dist.sample(&mut rng)).collect()
    })
}
