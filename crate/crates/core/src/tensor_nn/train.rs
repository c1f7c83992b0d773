use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::loss::{loss_and_grad, loss_value, LossKind};
use super::matrix::Matrix;
use super::mlp::Mlp;
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub val_fraction: f64,
    pub seed: u64,
}

impl TrainConfig {
    /// Conditional density network defaults.
    pub fn density_default(seed: u64) -> Self {
        Self {
            learning_rate: 5e-4,
            batch_size: 256,
            max_epochs: 500,
            patience: 40,
            val_fraction: 0.2,
            seed,
        }
    }

    /// Baseline networks in the simulation studies.
    pub fn baseline_default(seed: u64) -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 256,
            max_epochs: 180,
            patience: 10,
            val_fraction: 0.3,
            seed,
        }
    }

    /// Baseline networks on tabular data sets.
    pub fn baseline_real_data(seed: u64) -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 128,
            max_epochs: 200,
            patience: 20,
            val_fraction: 0.3,
            seed,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Caps `max_epochs`, shrinking patience with it if needed.
    pub fn capped(mut self, max_epochs: Option<usize>) -> Self {
        if let Some(cap) = max_epochs {
            if cap < self.max_epochs {
                self.max_epochs = cap.max(2);
                self.patience = self.patience.min(self.max_epochs - 1);
            }
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("train.learning_rate", "must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("train.batch_size", "must be >= 1"));
        }
        if self.max_epochs == 0 {
            return Err(Error::config("train.max_epochs", "must be >= 1"));
        }
        if self.patience >= self.max_epochs {
            return Err(Error::config("train.patience", "must be < max_epochs"));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(Error::config("train.val_fraction", "must lie in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs_run: usize,
    /// 1-based epoch whose weights were returned.
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub val_losses: Vec<f64>,
    pub stopped_early: bool,
}

/// Fits `net` with Adam and early stopping, returning the snapshot with the
/// lowest validation loss.
pub fn train(
    mut net: Mlp,
    inputs: &Matrix,
    targets: &Matrix,
    cfg: &TrainConfig,
    loss: &LossKind,
) -> Result<(Mlp, TrainReport)> {
    cfg.validate()?;
    let n = inputs.rows();
    if n == 0 {
        return Err(Error::EmptyData("training inputs"));
    }
    if targets.rows() != n {
        return Err(Error::DimensionMismatch {
            context: "train targets rows",
            expected: n,
            actual: targets.rows(),
        });
    }
    if n < 2 {
        return Err(Error::EmptyData("need >= 2 rows for a validation split"));
    }
    if matches!(loss, LossKind::GaussianNll) {
        let first = targets.get(0, 0);
        if (0..n).all(|i| targets.get(i, 0) == first) {
            return Err(Error::Degenerate(
                "all responses identical: Gaussian NLL variance head has no finite optimum".into(),
            ));
        }
    }

    let mut rng = rng_from_seed(cfg.seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let n_val = ((n as f64 * cfg.val_fraction).round() as usize).clamp(1, n - 1);
    let (train_idx, val_idx) = order.split_at(n - n_val);
    let mut train_idx = train_idx.to_vec();
    let val_x = inputs.select_rows(val_idx);
    let val_y = targets.select_rows(val_idx);

    let mut adam = Adam::new(&net, cfg.learning_rate);
    let mut best = net.clone();
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0;
    let mut since_best = 0;
    let mut val_losses = Vec::new();
    let mut stopped_early = false;
    let mut batch_counter = 0usize;

    for epoch in 1..=cfg.max_epochs {
        train_idx.shuffle(&mut rng);
        for chunk in train_idx.chunks(cfg.batch_size) {
            let bx = inputs.select_rows(chunk);
            let by = targets.select_rows(chunk);
            let (_, grads) = loss_and_grad(&net, &bx, &by, loss).map_err(|e| match e {
                Error::NonFiniteLoss { sample, .. } => Error::NonFiniteLoss {
                    batch: batch_counter,
                    sample,
                },
                other => other,
            })?;
            adam.step(&mut net, &grads);
            batch_counter += 1;
        }
        let val = loss_value(&net, &val_x, &val_y, loss)?;
        val_losses.push(val);
        if val < best_val {
            best_val = val;
            best = net.clone();
            best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                stopped_early = true;
                break;
            }
        }
    }

    Ok((
        best,
        TrainReport {
            epochs_run: val_losses.len(),
            best_epoch,
            best_val_loss: best_val,
            val_losses,
            stopped_early,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor_nn::MlpConfig;

    fn linear_data(n: usize) -> (Matrix, Matrix) {
        let xs: Vec<f64> = (0..n).map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x).collect();
        (Matrix::column_vector(&xs), Matrix::column_vector(&ys))
    }

    #[test]
    fn learns_a_line() {
        let (x, y) = linear_data(400);
        let net = Mlp::new(MlpConfig::new(1, vec![16, 16], 1, 5)).unwrap();
        let cfg = TrainConfig {
            learning_rate: 1e-2,
            batch_size: 32,
            max_epochs: 300,
            patience: 50,
            val_fraction: 0.2,
            seed: 11,
        };
        let (_, report) = train(net, &x, &y, &cfg, &LossKind::Mse).unwrap();
        assert!(report.best_val_loss < 1e-3, "val mse {}", report.best_val_loss);
    }

    #[test]
    fn identical_seeds_give_identical_weights() {
        let (x, y) = linear_data(100);
        let cfg = TrainConfig {
            learning_rate: 1e-2,
            batch_size: 16,
            max_epochs: 20,
            patience: 5,
            val_fraction: 0.25,
            seed: 3,
        };
        let mk = || Mlp::new(MlpConfig::new(1, vec![8], 1, 4)).unwrap();
        let (a, _) = train(mk(), &x, &y, &cfg, &LossKind::Mse).unwrap();
        let (b, _) = train(mk(), &x, &y, &cfg, &LossKind::Mse).unwrap();
        let bits = |m: &Mlp| -> Vec<u64> {
            m.layers()
                .iter()
                .flat_map(|l| l.weights.data().iter().chain(&l.bias).map(|v| v.to_bits()))
                .collect()
        };
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn stops_after_first_non_improving_epoch_with_patience_one() {
        let (x, y) = linear_data(60);
        // A huge step size makes the validation loss blow up after epoch 1.
        let cfg = TrainConfig {
            learning_rate: 50.0,
            batch_size: 8,
            max_epochs: 100,
            patience: 1,
            val_fraction: 0.3,
            seed: 1,
        };
        let net = Mlp::new(MlpConfig::new(1, vec![4], 1, 2)).unwrap();
        let (_, report) = train(net, &x, &y, &cfg, &LossKind::Mse).unwrap();
        let first_bad = report
            .val_losses
            .windows(2)
            .position(|w| w[1] >= w[0])
            .map(|p| p + 2)
            .unwrap();
        assert_eq!(report.epochs_run, first_bad);
        assert!(report.stopped_early);
        let min = report.val_losses.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(report.best_val_loss, min);
    }

    #[test]
    fn returns_best_snapshot_not_last() {
        let (x, y) = linear_data(80);
        let cfg = TrainConfig {
            learning_rate: 0.5,
            batch_size: 8,
            max_epochs: 30,
            patience: 29,
            val_fraction: 0.25,
            seed: 8,
        };
        let net = Mlp::new(MlpConfig::new(1, vec![8], 1, 2)).unwrap();
        let (best, report) = train(net, &x, &y, &cfg, &LossKind::Mse).unwrap();
        // Recompute the validation loss of the returned weights on the same split.
        let mut rng = rng_from_seed(cfg.seed);
        let mut order: Vec<usize> = (0..80).collect();
        order.shuffle(&mut rng);
        let val_idx = &order[60..];
        let got = loss_value(&best, &x.select_rows(val_idx), &y.select_rows(val_idx), &LossKind::Mse)
            .unwrap();
        assert_eq!(got, report.best_val_loss);
    }

    #[test]
    fn rejects_empty_and_degenerate_inputs() {
        let net = Mlp::new(MlpConfig::new(1, vec![4], 2, 0)).unwrap();
        let cfg = TrainConfig::baseline_default(0);
        let empty = Matrix::zeros(0, 1);
        assert!(matches!(
            train(net.clone(), &empty, &empty, &cfg, &LossKind::GaussianNll),
            Err(Error::EmptyData(_))
        ));
        let x = Matrix::column_vector(&[0.0, 1.0, 2.0, 3.0]);
        let y = Matrix::column_vector(&[1.0; 4]);
        assert!(matches!(
            train(net, &x, &y, &cfg, &LossKind::GaussianNll),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn config_validation() {
        let mut c = TrainConfig::density_default(0);
        assert!(c.validate().is_ok());
        c.patience = c.max_epochs;
        assert!(c.validate().is_err());
        let mut c = TrainConfig::density_default(0);
        c.val_fraction = 1.0;
        assert!(c.validate().is_err());
        let c = TrainConfig::density_default(0).capped(Some(10));
        assert_eq!((c.max_epochs, c.patience), (10, 9));
    }
}
