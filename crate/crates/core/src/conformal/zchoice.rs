use serde::{Deserialize, Serialize};

use super::cutoffs::{check_alpha, check_z};
use crate::cdf::{CdfModel, ConditionalCdf};
use crate::datapipe::{Dataset, Standardizer};
use crate::error::{Error, Result};
use crate::tensor_nn::{sigmoid, train, LossKind, Matrix, Mlp, MlpConfig, TrainConfig, TrainReport};

pub const DEFAULT_GRID_POINTS: usize = 41;
/// Distance kept between the z grid and the ends of `[0, α]`.
pub const GRID_EDGE: f64 = 1e-6;
/// Lengths closer than this (relative) count as ties and keep the smaller z.
const LENGTH_TIE: f64 = 1e-12;

/// `points` equally spaced values on `[GRID_EDGE, α − GRID_EDGE]`.
pub fn z_grid(alpha: f64, points: usize) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    if points < 2 {
        return Err(Error::config("grid_points", format!("need at least 2, got {points}")));
    }
    let (lo, hi) = (GRID_EDGE, alpha - GRID_EDGE);
    if hi <= lo {
        return Err(Error::config("alpha", "too small for the z grid"));
    }
    let step = (hi - lo) / (points - 1) as f64;
    Ok((0..points)
        .map(|i| if i + 1 == points { hi } else { lo + i as f64 * step })
        .collect())
}

/// Grid point minimizing `Q(z + 1 − α) − Q(z)` for one conditional.
pub fn optimal_z_for(cond: &dyn ConditionalCdf, alpha: f64, grid: &[f64]) -> f64 {
    let length = |z: f64| cond.quantile(z + 1.0 - alpha) - cond.quantile(z);
    let mut best = (grid[0], length(grid[0]));
    for &z in &grid[1..] {
        let len = length(z);
        if len < best.1 - LENGTH_TIE * best.1.abs().max(1.0) {
            best = (z, len);
        }
    }
    best.0
}

pub fn optimal_z_grid(model: &dyn CdfModel, x: &[f64], alpha: f64, grid_points: usize) -> Result<f64> {
    let grid = z_grid(alpha, grid_points)?;
    Ok(optimal_z_for(model.conditional(x)?.as_ref(), alpha, &grid))
}

/// Grid-optimal z for every row of `x`.
pub fn optimal_z_targets(model: &dyn CdfModel, x: &Matrix, alpha: f64, grid_points: usize) -> Result<Vec<f64>> {
    let grid = z_grid(alpha, grid_points)?;
    Ok(model
        .conditionals(x)?
        .iter()
        .map(|c| optimal_z_for(c.as_ref(), alpha, &grid))
        .collect())
}

/// `z_θ(x) = α·σ(g_θ(x))` on standardized features.
#[derive(Debug, Clone)]
pub struct AmortizedZ {
    pub net: Mlp,
    pub normalizer: Standardizer,
    pub alpha: f64,
}

impl AmortizedZ {
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let z = self.normalizer.apply_row(x)?;
        let g = self.net.forward(&Matrix::from_vec(1, z.len(), z)?)?;
        Ok(self.squash(g.get(0, 0)))
    }

    pub fn predict_many(&self, x: &Matrix) -> Result<Vec<f64>> {
        let g = self.net.forward(&self.normalizer.apply(x)?)?;
        Ok((0..g.rows()).map(|i| self.squash(g.get(i, 0))).collect())
    }

    /// Saturated sigmoids are pulled back inside the open interval.
    fn squash(&self, g: f64) -> f64 {
        let a = self.alpha;
        (a * sigmoid(g)).clamp(a * f64::EPSILON, a * (1.0 - f64::EPSILON))
    }
}

/// Regresses `targets` on `features` through `α·σ(·)`.
pub fn train_amortized_z(
    features: &Matrix,
    targets: &[f64],
    alpha: f64,
    mlp_cfg: &MlpConfig,
    train_cfg: &TrainConfig,
) -> Result<(AmortizedZ, TrainReport)> {
    check_alpha(alpha)?;
    if features.rows() != targets.len() {
        return Err(Error::DimensionMismatch {
            context: "amortized z targets",
            expected: features.rows(),
            actual: targets.len(),
        });
    }
    let normalizer = Standardizer::fit(features)?;
    let x = normalizer.apply(features)?;
    let cfg = MlpConfig {
        input_dim: features.cols(),
        output_dim: 1,
        ..mlp_cfg.clone()
    };
    let (net, report) = train(
        Mlp::new(cfg)?,
        &x,
        &Matrix::column_vector(targets),
        train_cfg,
        &LossKind::ScaledSigmoidMse { scale: alpha },
    )?;
    Ok((AmortizedZ { net, normalizer, alpha }, report))
}

/// Trains `z_θ` on grid-optimal targets computed at the training covariates.
pub fn fit_amortized_z(
    model: &dyn CdfModel,
    data: &Dataset,
    alpha: f64,
    mlp_cfg: &MlpConfig,
    train_cfg: &TrainConfig,
) -> Result<(AmortizedZ, TrainReport)> {
    if data.is_empty() {
        return Err(Error::EmptyData("amortized z training set"));
    }
    let targets = optimal_z_targets(model, &data.features, alpha, DEFAULT_GRID_POINTS)?;
    train_amortized_z(&data.features, &targets, alpha, mlp_cfg, train_cfg)
}

/// How the PIT offset `z` is chosen at a test point.
#[derive(Debug, Clone)]
pub enum ZStrategy {
    Fixed(f64),
    GridPerTest { grid_points: usize },
    Amortized(Box<AmortizedZ>),
}

/// Serializable label for run metadata.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZStrategyKind {
    Fixed,
    Grid,
    Amortized,
}

impl ZStrategy {
    pub fn kind(&self) -> ZStrategyKind {
        match self {
            ZStrategy::Fixed(_) => ZStrategyKind::Fixed,
            ZStrategy::GridPerTest { .. } => ZStrategyKind::Grid,
            ZStrategy::Amortized(_) => ZStrategyKind::Amortized,
        }
    }

    pub fn validate(&self, alpha: f64) -> Result<()> {
        check_alpha(alpha)?;
        match self {
            ZStrategy::Fixed(z) => check_z(alpha, *z),
            ZStrategy::GridPerTest { grid_points } => z_grid(alpha, *grid_points).map(|_| ()),
            ZStrategy::Amortized(m) if m.alpha != alpha => Err(Error::config(
                "z_strategy",
                format!("amortized model trained for alpha {} used at {alpha}", m.alpha),
            )),
            ZStrategy::Amortized(_) => Ok(()),
        }
    }

    /// z for each test row; `conds` are the matching model conditionals.
    pub fn resolve(&self, alpha: f64, x: &Matrix, conds: &[Box<dyn ConditionalCdf + '_>]) -> Result<Vec<f64>> {
        match self {
            ZStrategy::Fixed(z) => Ok(vec![*z; x.rows()]),
            ZStrategy::GridPerTest { grid_points } => {
                let grid = z_grid(alpha, *grid_points)?;
                Ok(conds.iter().map(|c| optimal_z_for(c.as_ref(), alpha, &grid)).collect())
            }
            ZStrategy::Amortized(m) => m.predict_many(x),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cdf::{BetaCdf, GaussianCdf, UniformCdf};

    #[test]
    fn grid_has_the_requested_shape() {
        let g = z_grid(0.1, 41).unwrap();
        assert_eq!(g.len(), 41);
        assert_eq!(g[0], 1e-6);
        assert_eq!(g[40], 0.1 - 1e-6);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        assert!(z_grid(0.1, 1).is_err());
    }

    #[test]
    fn beta31_prefers_the_right_edge() {
        let m = BetaCdf::new(3.0, 1.0, 1).unwrap();
        let z = optimal_z_grid(&m, &[0.0], 0.1, 41).unwrap();
        assert_eq!(z, 0.1 - 1e-6);
    }

    #[test]
    fn symmetric_normal_prefers_the_middle() {
        let m = GaussianCdf::homoscedastic(3.0, 0.05, 2);
        let z = optimal_z_grid(&m, &[0.1, 0.2], 0.1, 41).unwrap();
        assert!((z - 0.05).abs() <= 0.1 / 40.0, "z = {z}");
    }

    #[test]
    fn flat_objective_keeps_the_smallest_z() {
        let m = UniformCdf { lo: -2.0, hi: 5.0, dim: 1 };
        assert_eq!(optimal_z_grid(&m, &[0.0], 0.1, 41).unwrap(), 1e-6);
    }

    #[test]
    fn amortized_fits_a_constant_target() {
        let n = 400;
        let x = Matrix::from_vec(n, 2, (0..2 * n).map(|i| (i as f64 * 0.37).sin()).collect()).unwrap();
        let t = vec![0.05; n];
        let tc = TrainConfig {
            learning_rate: 1e-2,
            batch_size: 64,
            max_epochs: 80,
            patience: 20,
            val_fraction: 0.2,
            seed: 1,
        };
        let (m, _) = train_amortized_z(&x, &t, 0.1, &MlpConfig::new(0, vec![16], 0, 2), &tc).unwrap();
        for i in 0..n {
            let z = m.predict(x.row(i)).unwrap();
            assert!((0.04..=0.06).contains(&z), "z = {z}");
        }
    }

    #[test]
    fn amortized_output_stays_inside_the_open_interval() {
        let mut m = AmortizedZ {
            net: Mlp::zeros(MlpConfig::new(1, vec![1], 1, 0)).unwrap(),
            normalizer: Standardizer::fit(&Matrix::column_vector(&[0.0, 1.0])).unwrap(),
            alpha: 0.1,
        };
        for b in [-1e4, 0.0, 1e4] {
            m.net.layers_mut()[1].bias[0] = b;
            let z = m.predict(&[0.3]).unwrap();
            assert!(z > 0.0 && z < 0.1);
        }
    }

    #[test]
    fn strategy_validation() {
        assert!(ZStrategy::Fixed(0.2).validate(0.1).is_err());
        assert!(ZStrategy::Fixed(0.1).validate(0.1).is_ok());
        assert!(ZStrategy::GridPerTest { grid_points: 1 }.validate(0.1).is_err());
    }
}
