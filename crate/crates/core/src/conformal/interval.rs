use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use crate::cdf::ConditionalCdf;
use crate::datapipe::Dataset;
use crate::error::{Error, Result};
use crate::tensor_nn::Matrix;

/// Closed prediction interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || hi < lo {
            return Err(Error::InvertedInterval { lo, hi, tolerance: 0.0 });
        }
        Ok(Self { lo, hi })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, y: f64) -> bool {
        self.lo <= y && y <= self.hi
    }
}

/// Common surface of every calibrated interval method.
pub trait IntervalPredictor: Send + Sync {
    fn method(&self) -> &'static str;

    fn alpha(&self) -> f64;

    fn calibrate(&mut self, cal: &Dataset) -> Result<()>;

    fn predict_many(&self, x: &Matrix) -> Result<Vec<Interval>>;

    fn predict(&self, x: &[f64]) -> Result<Interval> {
        let m = Matrix::from_vec(1, x.len(), x.to_vec())?;
        Ok(self.predict_many(&m)?[0])
    }

    /// Intervals whose endpoints arrived reversed and were swapped.
    fn swapped_intervals(&self) -> usize {
        0
    }
}

/// Counter of swapped endpoints, shared across concurrent predictions.
#[derive(Debug, Default)]
pub struct SwapCounter(AtomicUsize);

impl SwapCounter {
    pub fn bump(&self) {
        self.0.fetch_add(1, Ordering::Relaxed);
    }

    pub fn get(&self) -> usize {
        self.0.load(Ordering::Relaxed)
    }
}

impl Clone for SwapCounter {
    fn clone(&self) -> Self {
        Self(AtomicUsize::new(self.get()))
    }
}

/// Builds `[lo, hi]` from inverted endpoints. A reversal no larger than the
/// conditional's inversion tolerance (measured in CDF units) is swapped and
/// counted; a larger one is an error.
pub(crate) fn endpoints_to_interval(
    lo: f64,
    hi: f64,
    cond: &dyn ConditionalCdf,
    swaps: &SwapCounter,
) -> Result<Interval> {
    if hi >= lo {
        return Ok(Interval { lo, hi });
    }
    let tolerance = cond.inversion_tolerance();
    if cond.cdf(lo) - cond.cdf(hi) <= tolerance {
        swaps.bump();
        Ok(Interval { lo: hi, hi: lo })
    } else {
        Err(Error::InvertedInterval { lo, hi, tolerance })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cdf::UniformCdf;

    #[test]
    fn closed_membership() {
        let i = Interval::new(1.0, 2.0).unwrap();
        assert!(i.contains(1.0) && i.contains(2.0) && !i.contains(2.0 + 1e-12));
        assert_eq!(i.width(), 1.0);
        assert!(Interval::new(2.0, 1.0).is_err());
    }

    #[test]
    fn small_reversals_are_swapped_large_ones_fail() {
        let c = UniformCdf { lo: 0.0, hi: 1.0, dim: 0 };
        let swaps = SwapCounter::default();
        let i = endpoints_to_interval(0.5 + 1e-13, 0.5, &c, &swaps).unwrap();
        assert!(i.lo <= i.hi);
        assert_eq!(swaps.get(), 1);
        assert!(endpoints_to_interval(0.6, 0.5, &c, &swaps).is_err());
    }
}
