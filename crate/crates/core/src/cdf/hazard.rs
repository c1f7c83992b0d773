//! Discrete-hazard conditional density network.
//!
//! The response range is cut into `B` equal bins. The network maps
//! standardized features to one logit per bin; bin `b` has hazard
//! `h_b = σ(l_b)` and contributes `−ln(1 − h_b) = softplus(l_b)` to the
//! cumulative hazard. `F(y | x) = 1 − exp(−Λ(y))` with `Λ` linear inside
//! each bin.

use super::{CdfModel, ConditionalCdf};
use crate::datapipe::{Dataset, Standardizer};
use crate::error::{Error, Result};
use crate::tensor_nn::{softplus, train, LossKind, Matrix, Mlp, MlpConfig, TrainConfig, TrainReport};

pub const DEFAULT_BINS: usize = 100;
/// Fraction of the response range added below the minimum and above the maximum.
pub const GRID_MARGIN: f64 = 0.05;

#[derive(Debug, Clone)]
pub struct HazardCdf {
    grid: Vec<f64>,
    net: Mlp,
    normalizer: Standardizer,
}

impl HazardCdf {
    pub fn new(grid: Vec<f64>, net: Mlp, normalizer: Standardizer) -> Result<Self> {
        if grid.len() < 3 {
            return Err(Error::config("bins", "need at least 2 bins"));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) || !grid.iter().all(|v| v.is_finite()) {
            return Err(Error::config("grid", "knots must be finite and strictly increasing"));
        }
        if net.output_dim() != grid.len() - 1 {
            return Err(Error::DimensionMismatch {
                context: "hazard network outputs vs bins",
                expected: grid.len() - 1,
                actual: net.output_dim(),
            });
        }
        if net.input_dim() != normalizer.dim() {
            return Err(Error::DimensionMismatch {
                context: "hazard network inputs vs normalizer",
                expected: normalizer.dim(),
                actual: net.input_dim(),
            });
        }
        Ok(Self { grid, net, normalizer })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn bins(&self) -> usize {
        self.grid.len() - 1
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn normalizer(&self) -> &Standardizer {
        &self.normalizer
    }

    /// Cumulative hazard at every knot, one row of `B + 1` values per input row.
    pub fn cumulative_hazards(&self, x: &Matrix) -> Result<Matrix> {
        let z = self.normalizer.apply(x)?;
        let logits = self.net.forward(&z)?;
        let b = self.bins();
        let mut out = Matrix::zeros(x.rows(), b + 1);
        for i in 0..x.rows() {
            let l = logits.row(i);
            let row = out.row_mut(i);
            for k in 0..b {
                row[k + 1] = row[k] + softplus(l[k]);
            }
        }
        Ok(out)
    }

    /// Conditional distributions for every row of `x` with one forward pass.
    pub fn hazard_conditionals(&self, x: &Matrix) -> Result<Vec<HazardConditional<'_>>> {
        let lam = self.cumulative_hazards(x)?;
        Ok((0..x.rows())
            .map(|i| HazardConditional::new(&self.grid, lam.row(i).to_vec()))
            .collect())
    }
}

impl CdfModel for HazardCdf {
    fn feature_dim(&self) -> usize {
        self.normalizer.dim()
    }

    fn conditional_unchecked<'a>(&'a self, x: &[f64]) -> Result<Box<dyn ConditionalCdf + 'a>> {
        let m = Matrix::from_vec(1, x.len(), x.to_vec())?;
        let lam = self.cumulative_hazards(&m)?.into_data();
        Ok(Box::new(HazardConditional::new(&self.grid, lam)))
    }

    fn conditionals<'a>(&'a self, x: &Matrix) -> Result<Vec<Box<dyn ConditionalCdf + 'a>>> {
        if x.cols() != self.feature_dim() {
            return Err(Error::DimensionMismatch {
                context: "CdfModel feature vector",
                expected: self.feature_dim(),
                actual: x.cols(),
            });
        }
        Ok(self
            .hazard_conditionals(x)?
            .into_iter()
            .map(|c| Box::new(c) as Box<dyn ConditionalCdf + 'a>)
            .collect())
    }

    fn name(&self) -> &'static str {
        "hazard"
    }
}

/// `F(· | x)` for one covariate value, as knots plus cumulative hazards.
#[derive(Debug, Clone)]
pub struct HazardConditional<'a> {
    grid: &'a [f64],
    lambda: Vec<f64>,
    tolerance: f64,
}

impl<'a> HazardConditional<'a> {
    pub fn new(grid: &'a [f64], lambda: Vec<f64>) -> Self {
        assert_eq!(grid.len(), lambda.len());
        let cdf_at = |l: f64| -(-l).exp_m1();
        let mut tolerance = 1.0 - cdf_at(*lambda.last().unwrap());
        for w in lambda.windows(2) {
            tolerance = tolerance.max(cdf_at(w[1]) - cdf_at(w[0]));
        }
        Self {
            grid,
            lambda,
            tolerance,
        }
    }

    pub fn cumulative_hazard(&self) -> &[f64] {
        &self.lambda
    }
}

impl ConditionalCdf for HazardConditional<'_> {
    fn cdf(&self, y: f64) -> f64 {
        let g = self.grid;
        let b = g.len() - 1;
        if y <= g[0] {
            return 0.0;
        }
        if y >= g[b] {
            return 1.0;
        }
        let k = (g.partition_point(|&v| v <= y) - 1).min(b - 1);
        let t = (y - g[k]) / (g[k + 1] - g[k]);
        let lam = self.lambda[k] + t * (self.lambda[k + 1] - self.lambda[k]);
        -(-lam).exp_m1()
    }

    fn quantile(&self, u: f64) -> f64 {
        let g = self.grid;
        let b = g.len() - 1;
        if u <= 0.0 {
            return g[0];
        }
        if u >= 1.0 {
            return g[b];
        }
        let target = -(-u).ln_1p();
        if target >= self.lambda[b] {
            return g[b];
        }
        // first knot whose cumulative hazard reaches the target
        let k = self.lambda.partition_point(|&l| l < target).max(1);
        let (l0, l1) = (self.lambda[k - 1], self.lambda[k]);
        let t = if l1 > l0 { (target - l0) / (l1 - l0) } else { 0.0 };
        g[k - 1] + t * (g[k] - g[k - 1])
    }

    fn inversion_tolerance(&self) -> f64 {
        self.tolerance
    }
}

/// Bin index of each response on an equally spaced grid.
fn bin_of(y: f64, lo: f64, width: f64, bins: usize) -> usize {
    (((y - lo) / width).floor().max(0.0) as usize).min(bins - 1)
}

/// Fits a hazard network on `data`. Input and output sizes of `mlp_cfg`
/// are overridden to match the data and `bins`.
pub fn fit_hazard_cdf(
    data: &Dataset,
    mlp_cfg: &MlpConfig,
    train_cfg: &TrainConfig,
    bins: usize,
) -> Result<(HazardCdf, TrainReport)> {
    if data.is_empty() {
        return Err(Error::EmptyData("hazard training set"));
    }
    if bins < 2 {
        return Err(Error::config("bins", format!("need at least 2, got {bins}")));
    }
    let (lo, hi) = data
        .responses
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &y| (a.min(y), b.max(y)));
    let range = hi - lo;
    if !(range > 0.0) || !range.is_finite() {
        return Err(Error::Degenerate(
            "response column is constant; cannot build a hazard grid".into(),
        ));
    }
    let start = lo - GRID_MARGIN * range;
    let end = hi + GRID_MARGIN * range;
    let width = (end - start) / bins as f64;
    let mut grid: Vec<f64> = (0..=bins).map(|k| start + k as f64 * width).collect();
    grid[bins] = end;

    let normalizer = Standardizer::fit(&data.features)?;
    let x = normalizer.apply(&data.features)?;
    let targets: Vec<f64> = data
        .responses
        .iter()
        .map(|&y| bin_of(y, start, width, bins) as f64)
        .collect();
    let cfg = MlpConfig {
        input_dim: data.dim(),
        output_dim: bins,
        ..mlp_cfg.clone()
    };
    let net = Mlp::new(cfg)?;
    let (net, report) = train(net, &x, &Matrix::column_vector(&targets), train_cfg, &LossKind::HazardBce)?;
    Ok((HazardCdf::new(grid, net, normalizer)?, report))
}
