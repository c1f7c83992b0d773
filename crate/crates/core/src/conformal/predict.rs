use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::calibration::{compute_pits, CalibrationState};
use super::cutoffs::{cpi_cutoffs, dcp_cutoffs, PitCutoffs};
use super::interval::{endpoints_to_interval, Interval, IntervalPredictor, SwapCounter};
use super::zchoice::ZStrategy;
use crate::cdf::CdfModel;
use crate::datapipe::Dataset;
use crate::error::{Error, Result};
use crate::tensor_nn::Matrix;

/// Which PIT-space band is calibrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PitMethod {
    /// Order statistics at ranks `L(z)` and `H(z)`.
    Cpi,
    /// Symmetric band around `z + (1−α)/2` with a conformal radius.
    Dcp,
}

impl PitMethod {
    pub fn name(self) -> &'static str {
        match self {
            PitMethod::Cpi => "CPI",
            PitMethod::Dcp => "DCP",
        }
    }

    pub fn cutoffs(self, state: &CalibrationState, alpha: f64, z: f64) -> Result<PitCutoffs> {
        match self {
            PitMethod::Cpi => cpi_cutoffs(state, alpha, z),
            PitMethod::Dcp => dcp_cutoffs(state, alpha, z),
        }
    }
}

/// Interval together with the z and PIT cutoffs that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PitPrediction {
    pub interval: Interval,
    pub z: f64,
    pub cutoffs: PitCutoffs,
}

/// Intervals for every row of `x`.
pub fn predict_pit_intervals(
    method: PitMethod,
    model: &dyn CdfModel,
    state: &CalibrationState,
    strategy: &ZStrategy,
    alpha: f64,
    x: &Matrix,
    swaps: &SwapCounter,
) -> Result<Vec<PitPrediction>> {
    strategy.validate(alpha)?;
    let conds = model.conditionals(x)?;
    let zs = strategy.resolve(alpha, x, &conds)?;
    // Grid strategies reuse a handful of z values, so cutoffs are cached by z.
    let mut cache: HashMap<u64, PitCutoffs> = HashMap::new();
    conds
        .iter()
        .zip(zs)
        .map(|(cond, z)| {
            let cut = match cache.get(&z.to_bits()) {
                Some(c) => *c,
                None => {
                    let c = method.cutoffs(state, alpha, z)?;
                    cache.insert(z.to_bits(), c);
                    c
                }
            };
            let lo = cond.quantile(cut.u_lo);
            let hi = cond.quantile(cut.u_hi);
            let interval = endpoints_to_interval(lo, hi, cond.as_ref(), swaps)?;
            Ok(PitPrediction {
                interval,
                z,
                cutoffs: cut,
            })
        })
        .collect()
}

fn single(
    method: PitMethod,
    model: &dyn CdfModel,
    state: &CalibrationState,
    strategy: &ZStrategy,
    alpha: f64,
    x: &[f64],
) -> Result<Interval> {
    let m = Matrix::from_vec(1, x.len(), x.to_vec())?;
    let p = predict_pit_intervals(method, model, state, strategy, alpha, &m, &SwapCounter::default())?;
    Ok(p[0].interval)
}

/// `[Q̂(u_lo | x), Q̂(u_hi | x)]` with order-statistic cutoffs.
pub fn predict_interval_cpi(
    model: &dyn CdfModel,
    state: &CalibrationState,
    strategy: &ZStrategy,
    alpha: f64,
    x: &[f64],
) -> Result<Interval> {
    single(PitMethod::Cpi, model, state, strategy, alpha, x)
}

/// `[Q̂(u_lo | x), Q̂(u_hi | x)]` with the symmetric conformal band.
pub fn predict_interval_dcp(
    model: &dyn CdfModel,
    state: &CalibrationState,
    strategy: &ZStrategy,
    alpha: f64,
    x: &[f64],
) -> Result<Interval> {
    single(PitMethod::Dcp, model, state, strategy, alpha, x)
}

/// CPI or DCP over a shared fitted CDF model.
#[derive(Clone)]
pub struct PitPredictor {
    model: Arc<dyn CdfModel>,
    method: PitMethod,
    strategy: ZStrategy,
    alpha: f64,
    tie_seed: u64,
    state: Option<CalibrationState>,
    swaps: SwapCounter,
}

impl PitPredictor {
    pub fn new(model: Arc<dyn CdfModel>, method: PitMethod, strategy: ZStrategy, alpha: f64, tie_seed: u64) -> Result<Self> {
        strategy.validate(alpha)?;
        Ok(Self {
            model,
            method,
            strategy,
            alpha,
            tie_seed,
            state: None,
            swaps: SwapCounter::default(),
        })
    }

    pub fn with_state(mut self, state: CalibrationState) -> Self {
        self.state = Some(state);
        self
    }

    pub fn state(&self) -> Option<&CalibrationState> {
        self.state.as_ref()
    }

    pub fn strategy(&self) -> &ZStrategy {
        &self.strategy
    }

    pub fn predict_detailed(&self, x: &Matrix) -> Result<Vec<PitPrediction>> {
        let state = self
            .state
            .as_ref()
            .ok_or_else(|| Error::config("predictor", "calibrate before predicting"))?;
        predict_pit_intervals(
            self.method,
            self.model.as_ref(),
            state,
            &self.strategy,
            self.alpha,
            x,
            &self.swaps,
        )
    }
}

impl IntervalPredictor for PitPredictor {
    fn method(&self) -> &'static str {
        self.method.name()
    }

    fn alpha(&self) -> f64 {
        self.alpha
    }

    fn calibrate(&mut self, cal: &Dataset) -> Result<()> {
        self.state = Some(compute_pits(self.model.as_ref(), cal, self.tie_seed)?);
        Ok(())
    }

    fn predict_many(&self, x: &Matrix) -> Result<Vec<Interval>> {
        Ok(self.predict_detailed(x)?.into_iter().map(|p| p.interval).collect())
    }

    fn swapped_intervals(&self) -> usize {
        self.swaps.get()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cdf::{BetaCdf, UniformCdf};

    #[test]
    fn degenerate_cutoffs_give_zero_width() {
        let model = UniformCdf { lo: 0.0, hi: 10.0, dim: 1 };
        let state = CalibrationState::from_pits(vec![0.3; 20], 0).unwrap();
        let i = predict_interval_cpi(&model, &state, &ZStrategy::Fixed(0.05), 0.1, &[0.0]).unwrap();
        assert_eq!((i.lo, i.hi), (3.0, 3.0));
    }

    #[test]
    fn beta_pits_through_beta_model_map_back_to_cutoffs() {
        let model = BetaCdf::new(3.0, 1.0, 1).unwrap();
        let p: Vec<f64> = (1..=99).map(|i| i as f64 / 100.0).collect();
        let state = CalibrationState::from_pits(p, 0).unwrap();
        let i = predict_interval_cpi(&model, &state, &ZStrategy::Fixed(0.05), 0.1, &[0.0]).unwrap();
        // L = 6, H = 95 for n = 99
        assert!((i.lo - 0.06f64.cbrt()).abs() < 1e-12);
        assert!((i.hi - 0.95f64.cbrt()).abs() < 1e-12);
    }

    #[test]
    fn predictor_requires_calibration() {
        let model: Arc<dyn CdfModel> = Arc::new(UniformCdf { lo: 0.0, hi: 1.0, dim: 1 });
        let mut p = PitPredictor::new(model, PitMethod::Dcp, ZStrategy::Fixed(0.05), 0.1, 3).unwrap();
        assert!(p.predict(&[0.0]).is_err());
        let cal = Dataset::new(
            Matrix::column_vector(&vec![0.0; 50]),
            (0..50).map(|i| (i as f64 + 0.5) / 50.0).collect(),
            "u",
        )
        .unwrap();
        p.calibrate(&cal).unwrap();
        let i = p.predict(&[0.0]).unwrap();
        assert!(i.lo < 0.1 && i.hi > 0.9);
        assert_eq!(p.method(), "DCP");
    }
}
