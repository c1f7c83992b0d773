use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::cdf::CdfModel;
use crate::datapipe::Dataset;
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// PIT values are kept this far away from 0 and 1.
pub const PIT_CLAMP: f64 = 1e-12;

/// Sorted calibration PITs `U_(1) ≤ … ≤ U_(n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationState {
    sorted_pits: Vec<f64>,
    /// `order[k]` is the calibration index holding rank `k + 1`.
    order: Vec<usize>,
    tie_seed: u64,
}

impl CalibrationState {
    /// Sorts raw PITs. Equal values are ordered by a seeded random key,
    /// which fixes the rank each tied observation receives.
    pub fn from_pits(pits: Vec<f64>, tie_seed: u64) -> Result<Self> {
        if pits.is_empty() {
            return Err(Error::EmptyData("calibration PITs"));
        }
        if let Some(&bad) = pits.iter().find(|u| !(0.0..=1.0).contains(*u)) {
            return Err(Error::OutOfRange {
                name: "PIT",
                value: bad,
                allowed: "[0, 1]",
            });
        }
        let mut rng = rng_from_seed(tie_seed);
        let keys: Vec<u64> = (0..pits.len()).map(|_| rng.random()).collect();
        let mut order: Vec<usize> = (0..pits.len()).collect();
        order.sort_by(|&a, &b| pits[a].total_cmp(&pits[b]).then(keys[a].cmp(&keys[b])));
        let sorted_pits = order.iter().map(|&i| pits[i]).collect();
        Ok(Self {
            sorted_pits,
            order,
            tie_seed,
        })
    }

    pub fn n(&self) -> usize {
        self.sorted_pits.len()
    }

    pub fn sorted_pits(&self) -> &[f64] {
        &self.sorted_pits
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn tie_seed(&self) -> u64 {
        self.tie_seed
    }

    /// `U_(k)` for 1-based `k`, with `U_(0) = 0` and `U_(k) = 1` for `k > n`.
    pub fn order_statistic(&self, k: usize) -> f64 {
        match k {
            0 => 0.0,
            k if k > self.n() => 1.0,
            k => self.sorted_pits[k - 1],
        }
    }
}

/// `U_j = F̂(Y_j | X_j)` over the calibration set, clamped into
/// `[PIT_CLAMP, 1 − PIT_CLAMP]`.
pub fn compute_pits(model: &dyn CdfModel, cal: &Dataset, tie_seed: u64) -> Result<CalibrationState> {
    if cal.is_empty() {
        return Err(Error::EmptyData("calibration set"));
    }
    let conds = model.conditionals(&cal.features)?;
    let pits = conds
        .iter()
        .zip(&cal.responses)
        .map(|(c, &y)| c.cdf(y).clamp(PIT_CLAMP, 1.0 - PIT_CLAMP))
        .collect();
    CalibrationState::from_pits(pits, tie_seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cdf::UniformCdf;
    use crate::tensor_nn::Matrix;

    #[test]
    fn sorts_and_indexes_with_edge_conventions() {
        let s = CalibrationState::from_pits(vec![0.3, 0.1, 0.2], 0).unwrap();
        assert_eq!(s.sorted_pits(), &[0.1, 0.2, 0.3]);
        assert_eq!(s.order(), &[1, 2, 0]);
        assert_eq!(s.order_statistic(0), 0.0);
        assert_eq!(s.order_statistic(2), 0.2);
        assert_eq!(s.order_statistic(4), 1.0);
    }

    #[test]
    fn ties_are_broken_by_seed_only() {
        let pits = vec![0.7; 50];
        let a = CalibrationState::from_pits(pits.clone(), 9).unwrap();
        let b = CalibrationState::from_pits(pits.clone(), 9).unwrap();
        let c = CalibrationState::from_pits(pits, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.order(), c.order());
        assert!(a.sorted_pits().iter().all(|&u| u == 0.7));
    }

    #[test]
    fn rejects_empty_and_out_of_range() {
        assert!(CalibrationState::from_pits(vec![], 0).is_err());
        assert!(CalibrationState::from_pits(vec![0.5, 1.5], 0).is_err());
        assert!(CalibrationState::from_pits(vec![f64::NAN], 0).is_err());
    }

    #[test]
    fn pits_are_clamped_away_from_the_edges() {
        let model = UniformCdf { lo: 0.0, hi: 1.0, dim: 1 };
        let cal = Dataset::new(
            Matrix::column_vector(&[0.0, 0.0, 0.0]),
            vec![-5.0, 0.25, 9.0],
            "t",
        )
        .unwrap();
        let s = compute_pits(&model, &cal, 1).unwrap();
        assert_eq!(s.sorted_pits(), &[PIT_CLAMP, 0.25, 1.0 - PIT_CLAMP]);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let model = UniformCdf { lo: 0.0, hi: 1.0, dim: 2 };
        let cal = Dataset::new(Matrix::column_vector(&[0.0]), vec![0.5], "t").unwrap();
        assert!(matches!(
            compute_pits(&model, &cal, 0),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
