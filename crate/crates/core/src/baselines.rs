//! Residual, variance-rescaled residual, and conformalized quantile
//! regression baselines.
//!
//! Each network is trained on standardized features and a standardized
//! response; outputs are mapped back to the response scale before scoring.

use serde::{Deserialize, Serialize};

use crate::conformal::{ConformalQuantile, Interval, IntervalPredictor, SwapCounter};
use crate::datapipe::{Dataset, Standardizer};
use crate::error::{Error, Result};
use crate::tensor_nn::{train, LossKind, Matrix, Mlp, MlpConfig, TrainConfig, TrainReport};

/// Lower bound on the rescaled baseline's σ̂, in response units.
pub const SIGMA_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineKind {
    Residual,
    Rescaled,
    Cqr,
}

impl BaselineKind {
    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::Residual => "Residual",
            BaselineKind::Rescaled => "Rescaled",
            BaselineKind::Cqr => "CQR",
        }
    }

    /// Hidden widths used in the synthetic experiments.
    pub fn simulation_hidden(self) -> Vec<usize> {
        match self {
            BaselineKind::Residual | BaselineKind::Rescaled => vec![32, 32],
            BaselineKind::Cqr => vec![16, 16],
        }
    }
}

/// A trained network with the affine maps around it.
#[derive(Debug, Clone)]
pub struct FittedNet {
    pub net: Mlp,
    pub x_norm: Standardizer,
    pub y_mean: f64,
    pub y_sd: f64,
}

impl FittedNet {
    /// Raw network outputs for `x`, one row per input row.
    pub fn outputs(&self, x: &Matrix) -> Result<Matrix> {
        self.net.forward(&self.x_norm.apply(x)?)
    }

    fn to_response(&self, v: f64) -> f64 {
        self.y_mean + self.y_sd * v
    }
}

fn fit_net(
    data: &Dataset,
    hidden: &MlpConfig,
    train_cfg: &TrainConfig,
    outputs: usize,
    loss: &LossKind,
) -> Result<(FittedNet, TrainReport)> {
    if data.is_empty() {
        return Err(Error::EmptyData("baseline training set"));
    }
    let x_norm = Standardizer::fit(&data.features)?;
    let n = data.len() as f64;
    let y_mean = data.responses.iter().sum::<f64>() / n;
    let var = data.responses.iter().map(|y| (y - y_mean).powi(2)).sum::<f64>() / n;
    let y_sd = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
    let y: Vec<f64> = data.responses.iter().map(|v| (v - y_mean) / y_sd).collect();
    let cfg = MlpConfig {
        input_dim: data.dim(),
        output_dim: outputs,
        ..hidden.clone()
    };
    let (net, report) = train(
        Mlp::new(cfg)?,
        &x_norm.apply(&data.features)?,
        &Matrix::column_vector(&y),
        train_cfg,
        loss,
    )?;
    Ok((FittedNet { net, x_norm, y_mean, y_sd }, report))
}

/// Rounds to a multiple of 2⁻³². Centres and radii on this grid make
/// `(m + q) − (m − q)` exactly `2q` while `|m| + |q| < 2²⁰`, so residual
/// widths are bit-identical across test points. The rescaled baseline
/// uses the same rounding so it coincides with the residual one at σ̂ ≡ 1.
fn snap_dyadic(v: f64) -> f64 {
    const SCALE: f64 = 4_294_967_296.0;
    if v.is_finite() && v.abs() < 1_048_576.0 {
        (v * SCALE).round() / SCALE
    } else {
        v
    }
}

fn require_q(q: &Option<ConformalQuantile>) -> Result<f64> {
    q.map(|q| q.q_hat)
        .ok_or_else(|| Error::config("predictor", "calibrate before predicting"))
}

fn check_cal(cal: &Dataset) -> Result<()> {
    if cal.is_empty() {
        Err(Error::EmptyData("calibration set"))
    } else {
        Ok(())
    }
}

/// `μ̂(x) ± q̂` with scores `|y − μ̂(x)|`.
#[derive(Debug, Clone)]
pub struct ResidualPredictor {
    pub fit: FittedNet,
    pub alpha: f64,
    pub quantile: Option<ConformalQuantile>,
}

impl ResidualPredictor {
    pub fn mean(&self, x: &Matrix) -> Result<Vec<f64>> {
        let out = self.fit.outputs(x)?;
        Ok((0..out.rows()).map(|i| self.fit.to_response(out.get(i, 0))).collect())
    }
}

pub fn fit_residual(
    data: &Dataset,
    mlp_cfg: &MlpConfig,
    train_cfg: &TrainConfig,
    alpha: f64,
) -> Result<(ResidualPredictor, TrainReport)> {
    let (fit, report) = fit_net(data, mlp_cfg, train_cfg, 1, &LossKind::Mse)?;
    Ok((ResidualPredictor { fit, alpha, quantile: None }, report))
}

impl IntervalPredictor for ResidualPredictor {
    fn method(&self) -> &'static str {
        BaselineKind::Residual.name()
    }

    fn alpha(&self) -> f64 {
        self.alpha
    }

    fn calibrate(&mut self, cal: &Dataset) -> Result<()> {
        check_cal(cal)?;
        let mu = self.mean(&cal.features)?;
        let scores: Vec<f64> = mu.iter().zip(&cal.responses).map(|(m, y)| (y - m).abs()).collect();
        self.quantile = Some(ConformalQuantile::from_scores(&scores, self.alpha)?);
        Ok(())
    }

    fn predict_many(&self, x: &Matrix) -> Result<Vec<Interval>> {
        let q = snap_dyadic(require_q(&self.quantile)?);
        Ok(self
            .mean(x)?
            .into_iter()
            .map(|m| {
                let m = snap_dyadic(m);
                Interval { lo: m - q, hi: m + q }
            })
            .collect())
    }
}

/// `μ̂(x) ± q̂·σ̂(x)` with scores `|y − μ̂(x)| / σ̂(x)`.
#[derive(Debug, Clone)]
pub struct RescaledPredictor {
    pub fit: FittedNet,
    pub alpha: f64,
    pub quantile: Option<ConformalQuantile>,
}

impl RescaledPredictor {
    /// `(μ̂, σ̂)` in response units; σ̂ is floored at [`SIGMA_FLOOR`].
    pub fn mean_scale(&self, x: &Matrix) -> Result<Vec<(f64, f64)>> {
        let out = self.fit.outputs(x)?;
        Ok((0..out.rows())
            .map(|i| {
                let mu = self.fit.to_response(out.get(i, 0));
                let sd = (self.fit.y_sd * (0.5 * out.get(i, 1)).exp()).max(SIGMA_FLOOR);
                (mu, sd)
            })
            .collect())
    }
}

pub fn fit_rescaled(
    data: &Dataset,
    mlp_cfg: &MlpConfig,
    train_cfg: &TrainConfig,
    alpha: f64,
) -> Result<(RescaledPredictor, TrainReport)> {
    let (fit, report) = fit_net(data, mlp_cfg, train_cfg, 2, &LossKind::GaussianNll)?;
    Ok((RescaledPredictor { fit, alpha, quantile: None }, report))
}

impl IntervalPredictor for RescaledPredictor {
    fn method(&self) -> &'static str {
        BaselineKind::Rescaled.name()
    }

    fn alpha(&self) -> f64 {
        self.alpha
    }

    fn calibrate(&mut self, cal: &Dataset) -> Result<()> {
        check_cal(cal)?;
        let ms = self.mean_scale(&cal.features)?;
        let scores: Vec<f64> = ms
            .iter()
            .zip(&cal.responses)
            .map(|((m, s), y)| (y - m).abs() / s)
            .collect();
        self.quantile = Some(ConformalQuantile::from_scores(&scores, self.alpha)?);
        Ok(())
    }

    fn predict_many(&self, x: &Matrix) -> Result<Vec<Interval>> {
        let q = require_q(&self.quantile)?;
        Ok(self
            .mean_scale(x)?
            .into_iter()
            .map(|(m, s)| {
                let (m, r) = (snap_dyadic(m), snap_dyadic(q * s));
                Interval { lo: m - r, hi: m + r }
            })
            .collect())
    }
}

/// `[q̂_lo(x) − q̂, q̂_hi(x) + q̂]` with scores `max(q̂_lo − y, y − q̂_hi)`.
#[derive(Debug, Clone)]
pub struct CqrPredictor {
    pub fit: FittedNet,
    pub alpha: f64,
    pub quantile: Option<ConformalQuantile>,
    crossings: SwapCounter,
}

impl CqrPredictor {
    pub fn new(fit: FittedNet, alpha: f64) -> Self {
        Self {
            fit,
            alpha,
            quantile: None,
            crossings: SwapCounter::default(),
        }
    }

    /// Lower and upper quantile heads in response units. Crossed heads are
    /// swapped and counted.
    pub fn band(&self, x: &Matrix) -> Result<Vec<(f64, f64)>> {
        let out = self.fit.outputs(x)?;
        Ok((0..out.rows())
            .map(|i| {
                let a = self.fit.to_response(out.get(i, 0));
                let b = self.fit.to_response(out.get(i, 1));
                if a > b {
                    self.crossings.bump();
                    (b, a)
                } else {
                    (a, b)
                }
            })
            .collect())
    }

    pub fn crossings(&self) -> usize {
        self.crossings.get()
    }
}

pub fn fit_cqr(
    data: &Dataset,
    mlp_cfg: &MlpConfig,
    train_cfg: &TrainConfig,
    alpha: f64,
) -> Result<(CqrPredictor, TrainReport)> {
    let levels = vec![alpha / 2.0, 1.0 - alpha / 2.0];
    let (fit, report) = fit_net(data, mlp_cfg, train_cfg, 2, &LossKind::Pinball { levels })?;
    Ok((CqrPredictor::new(fit, alpha), report))
}

impl IntervalPredictor for CqrPredictor {
    fn method(&self) -> &'static str {
        BaselineKind::Cqr.name()
    }

    fn alpha(&self) -> f64 {
        self.alpha
    }

    fn calibrate(&mut self, cal: &Dataset) -> Result<()> {
        check_cal(cal)?;
        let band = self.band(&cal.features)?;
        let scores: Vec<f64> = band
            .iter()
            .zip(&cal.responses)
            .map(|((lo, hi), y)| (lo - y).max(y - hi))
            .collect();
        self.quantile = Some(ConformalQuantile::from_scores(&scores, self.alpha)?);
        Ok(())
    }

    fn predict_many(&self, x: &Matrix) -> Result<Vec<Interval>> {
        let q = require_q(&self.quantile)?;
        self.band(x)?
            .into_iter()
            .map(|(lo, hi)| {
                // a negative q̂ may shrink the band past itself
                let (a, b) = (lo - q, hi + q);
                Interval::new(a.min(b), a.max(b))
            })
            .collect()
    }

    fn swapped_intervals(&self) -> usize {
        self.crossings()
    }
}
