use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use super::mlp::{Gradients, Mlp};
use crate::error::{Error, Result};

/// Training objectives. Every loss is averaged over the samples of a batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LossKind {
    /// Mean squared error over all output entries; targets match output shape.
    Mse,
    /// Two outputs (mean, log-variance) against a single target column.
    GaussianNll,
    /// One output per quantile level against a single target column; summed over heads.
    Pinball { levels: Vec<f64> },
    /// Discrete-hazard likelihood: one logit per response bin, target column
    /// holds the bin index of the observation.
    HazardBce,
    /// MSE applied to `scale · sigmoid(output)` against a single target column.
    ScaledSigmoidMse { scale: f64 },
}

impl LossKind {
    /// Loss value and ∂loss/∂outputs for a batch of network outputs.
    pub fn evaluate(&self, outputs: &Matrix, targets: &Matrix) -> Result<(f64, Matrix)> {
        self.check_shapes(outputs, targets)?;
        let m = outputs.rows();
        if m == 0 {
            return Err(Error::EmptyData("loss batch"));
        }
        let inv_m = 1.0 / m as f64;
        let mut grad = Matrix::zeros(outputs.rows(), outputs.cols());
        let mut total = 0.0;
        for i in 0..m {
            let out = outputs.row(i);
            let tgt = targets.row(i);
            let g = grad.row_mut(i);
            let sample = match self {
                LossKind::Mse => {
                    let k = out.len() as f64;
                    let mut s = 0.0;
                    for ((o, t), gi) in out.iter().zip(tgt).zip(g.iter_mut()) {
                        let r = o - t;
                        s += r * r / k;
                        *gi = 2.0 * r / k * inv_m;
                    }
                    s
                }
                LossKind::GaussianNll => {
                    let (mu, log_var) = (out[0], out[1]);
                    let r = tgt[0] - mu;
                    let prec = (-log_var).exp();
                    g[0] = -r * prec * inv_m;
                    g[1] = 0.5 * (1.0 - r * r * prec) * inv_m;
                    0.5 * ((2.0 * PI).ln() + log_var + r * r * prec)
                }
                LossKind::Pinball { levels } => {
                    let y = tgt[0];
                    let mut s = 0.0;
                    for ((o, tau), gi) in out.iter().zip(levels).zip(g.iter_mut()) {
                        let r = y - o;
                        if r >= 0.0 {
                            s += tau * r;
                            *gi = -tau * inv_m;
                        } else {
                            s += (tau - 1.0) * r;
                            *gi = (1.0 - tau) * inv_m;
                        }
                    }
                    s
                }
                LossKind::HazardBce => {
                    let k = hazard_target_bin(tgt[0], out.len()).ok_or(Error::OutOfRange {
                        name: "hazard bin index",
                        value: tgt[0],
                        allowed: "integer in [0, bins)",
                    })?;
                    let mut s = 0.0;
                    for b in 0..k {
                        s += softplus(out[b]);
                        g[b] = sigmoid(out[b]) * inv_m;
                    }
                    s += softplus(-out[k]);
                    g[k] = (sigmoid(out[k]) - 1.0) * inv_m;
                    s
                }
                LossKind::ScaledSigmoidMse { scale } => {
                    let sg = sigmoid(out[0]);
                    let r = scale * sg - tgt[0];
                    g[0] = 2.0 * r * scale * sg * (1.0 - sg) * inv_m;
                    r * r
                }
            };
            if !sample.is_finite() {
                return Err(Error::NonFiniteLoss { batch: 0, sample: i });
            }
            total += sample;
        }
        Ok((total * inv_m, grad))
    }

    fn check_shapes(&self, outputs: &Matrix, targets: &Matrix) -> Result<()> {
        if outputs.rows() != targets.rows() {
            return Err(Error::DimensionMismatch {
                context: "loss rows",
                expected: outputs.rows(),
                actual: targets.rows(),
            });
        }
        let (want_out, want_tgt) = match self {
            LossKind::Mse => (outputs.cols(), outputs.cols()),
            LossKind::GaussianNll => (2, 1),
            LossKind::Pinball { levels } => (levels.len(), 1),
            LossKind::HazardBce => (outputs.cols(), 1),
            LossKind::ScaledSigmoidMse { .. } => (1, 1),
        };
        if outputs.cols() != want_out {
            return Err(Error::DimensionMismatch {
                context: "loss output columns",
                expected: want_out,
                actual: outputs.cols(),
            });
        }
        if targets.cols() != want_tgt {
            return Err(Error::DimensionMismatch {
                context: "loss target columns",
                expected: want_tgt,
                actual: targets.cols(),
            });
        }
        Ok(())
    }
}

fn hazard_target_bin(v: f64, bins: usize) -> Option<usize> {
    if v >= 0.0 && v.fract() == 0.0 && (v as usize) < bins {
        Some(v as usize)
    } else {
        None
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
pub(crate) fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Scalar loss and parameter gradients for one batch.
pub fn loss_and_grad(
    net: &Mlp,
    batch_x: &Matrix,
    batch_y: &Matrix,
    loss: &LossKind,
) -> Result<(f64, Gradients)> {
    let cache = net.forward_cached(batch_x)?;
    let (value, d_out) = loss.evaluate(cache.output(), batch_y)?;
    Ok((value, net.backward(&cache, &d_out)))
}

/// Loss value only.
pub fn loss_value(net: &Mlp, x: &Matrix, y: &Matrix, loss: &LossKind) -> Result<f64> {
    let out = net.forward(x)?;
    Ok(loss.evaluate(&out, y)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor_nn::MlpConfig;

    #[test]
    fn median_pinball_is_half_absolute_error() {
        let loss = LossKind::Pinball { levels: vec![0.5] };
        for (p, y) in [(1.0, 3.0), (2.5, -1.0), (0.0, 0.0)] {
            let out = Matrix::from_vec(1, 1, vec![p]).unwrap();
            let tgt = Matrix::from_vec(1, 1, vec![y]).unwrap();
            let (v, _) = loss.evaluate(&out, &tgt).unwrap();
            assert!((v - 0.5 * (y - p as f64).abs()).abs() < 1e-15);
        }
    }

    #[test]
    fn gaussian_nll_with_zero_residual() {
        for v in [-2.0, 0.0, 1.3] {
            let out = Matrix::from_vec(1, 2, vec![0.7, v]).unwrap();
            let tgt = Matrix::from_vec(1, 1, vec![0.7]).unwrap();
            let (l, _) = LossKind::GaussianNll.evaluate(&out, &tgt).unwrap();
            assert!((l - 0.5 * ((2.0 * PI).ln() + v)).abs() < 1e-14);
        }
    }

    #[test]
    fn hazard_loss_matches_survival_likelihood() {
        let logits = [0.3, -1.2, 2.0, 0.1];
        let h: Vec<f64> = logits.iter().map(|&l| sigmoid(l)).collect();
        let out = Matrix::from_vec(1, 4, logits.to_vec()).unwrap();
        let tgt = Matrix::from_vec(1, 1, vec![2.0]).unwrap();
        let (l, _) = LossKind::HazardBce.evaluate(&out, &tgt).unwrap();
        let want = -(1.0 - h[0]).ln() - (1.0 - h[1]).ln() - h[2].ln();
        assert!((l - want).abs() < 1e-12);
    }

    #[test]
    fn hazard_rejects_bad_bin() {
        let out = Matrix::zeros(1, 3);
        for bad in [3.0, -1.0, 0.5] {
            let tgt = Matrix::from_vec(1, 1, vec![bad]).unwrap();
            assert!(LossKind::HazardBce.evaluate(&out, &tgt).is_err());
        }
    }

    #[test]
    fn non_finite_loss_names_the_sample() {
        let out = Matrix::from_vec(3, 2, vec![0.0, 0.0, 0.0, -1e6, 0.0, 0.0]).unwrap();
        let tgt = Matrix::from_vec(3, 1, vec![0.0, 1.0, 0.0]).unwrap();
        let err = LossKind::GaussianNll.evaluate(&out, &tgt).unwrap_err();
        assert!(matches!(err, Error::NonFiniteLoss { sample: 1, .. }));
    }

    #[test]
    fn loss_shape_checks() {
        let net = crate::tensor_nn::Mlp::new(MlpConfig::new(2, vec![3], 1, 0)).unwrap();
        let x = Matrix::zeros(4, 2);
        assert!(loss_and_grad(&net, &x, &Matrix::zeros(4, 1), &LossKind::GaussianNll).is_err());
        assert!(loss_and_grad(&net, &x, &Matrix::zeros(3, 1), &LossKind::Mse).is_err());
    }

    #[test]
    fn softplus_is_stable() {
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(softplus(800.0), 800.0);
        assert!(softplus(-800.0) >= 0.0);
    }
}
