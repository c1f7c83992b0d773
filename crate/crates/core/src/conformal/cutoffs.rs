use serde::{Deserialize, Serialize};

use super::calibration::CalibrationState;
use crate::error::{Error, Result};

/// Products like `z·(n+1)` that land within this distance of an integer are
/// treated as that integer, so `0.1 · 200` floors and ceils to 20.
const INTEGER_SNAP: f64 = 1e-9;

fn snap(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() <= INTEGER_SNAP * r.abs().max(1.0) {
        r
    } else {
        v
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name: "alpha",
            value: alpha,
            allowed: "(0, 1)",
        })
    }
}

pub(crate) fn check_z(alpha: f64, z: f64) -> Result<()> {
    if (0.0..=alpha).contains(&z) {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name: "z",
            value: z,
            allowed: "[0, alpha]",
        })
    }
}

/// Order-statistic ranks `L = ⌊z(n+1)⌋ + 1` and `H = ⌈(z + 1 − α)(n+1)⌉`.
/// Either may exceed `n`; such ranks read as `U = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankIndices {
    pub lower: usize,
    pub upper: usize,
}

impl RankIndices {
    /// Ranks restricted to `1..=n`.
    pub fn clamped(&self, n: usize) -> (usize, usize) {
        (self.lower.clamp(1, n), self.upper.clamp(1, n))
    }
}

pub fn rank_indices(n: usize, alpha: f64, z: f64) -> Result<RankIndices> {
    if n == 0 {
        return Err(Error::EmptyData("calibration PITs"));
    }
    check_alpha(alpha)?;
    check_z(alpha, z)?;
    let m = (n + 1) as f64;
    let lower = snap(z * m).floor() as usize + 1;
    let upper = (snap((z + 1.0 - alpha) * m).ceil() as usize).max(lower);
    Ok(RankIndices { lower, upper })
}

/// PIT-space interval `[u_lo, u_hi]` plus the ranks that produced it.
/// For DCP both ranks hold the rank of `q̂` among the scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PitCutoffs {
    pub u_lo: f64,
    pub u_hi: f64,
    pub lower_rank: usize,
    pub upper_rank: usize,
}

impl PitCutoffs {
    pub fn length(&self) -> f64 {
        self.u_hi - self.u_lo
    }
}

pub fn cpi_cutoffs(state: &CalibrationState, alpha: f64, z: f64) -> Result<PitCutoffs> {
    let r = rank_indices(state.n(), alpha, z)?;
    Ok(PitCutoffs {
        u_lo: state.order_statistic(r.lower),
        u_hi: state.order_statistic(r.upper),
        lower_rank: r.lower,
        upper_rank: r.upper,
    })
}

/// Rank `⌈(1−α)(n+1)⌉` used for every split-conformal score quantile.
pub fn conformal_rank(n: usize, alpha: f64) -> usize {
    snap((1.0 - alpha) * (n + 1) as f64).ceil() as usize
}

/// Split-conformal quantile of nonnegative scores; `+∞` when the rank
/// exceeds the number of scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConformalQuantile {
    pub q_hat: f64,
    pub n: usize,
    pub alpha: f64,
}

impl ConformalQuantile {
    pub fn from_scores(scores: &[f64], alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if scores.is_empty() {
            return Err(Error::EmptyData("conformal scores"));
        }
        if let Some(&bad) = scores.iter().find(|s| s.is_nan()) {
            return Err(Error::OutOfRange {
                name: "score",
                value: bad,
                allowed: "a number",
            });
        }
        let n = scores.len();
        let k = conformal_rank(n, alpha);
        let q_hat = if k > n {
            f64::INFINITY
        } else {
            let mut s = scores.to_vec();
            let (_, kth, _) = s.select_nth_unstable_by(k - 1, f64::total_cmp);
            *kth
        };
        Ok(Self { q_hat, n, alpha })
    }

    pub fn rank(&self) -> usize {
        conformal_rank(self.n, self.alpha)
    }
}

/// Centre `c = z + (1−α)/2` of the symmetric PIT band.
pub fn dcp_center(alpha: f64, z: f64) -> f64 {
    z + 0.5 * (1.0 - alpha)
}

pub fn dcp_cutoffs(state: &CalibrationState, alpha: f64, z: f64) -> Result<PitCutoffs> {
    check_alpha(alpha)?;
    check_z(alpha, z)?;
    let c = dcp_center(alpha, z);
    let scores: Vec<f64> = state.sorted_pits().iter().map(|u| (u - c).abs()).collect();
    let q = ConformalQuantile::from_scores(&scores, alpha)?;
    Ok(dcp_band(c, q.q_hat, q.rank()))
}

pub(crate) fn dcp_band(c: f64, q_hat: f64, rank: usize) -> PitCutoffs {
    PitCutoffs {
        u_lo: (c - q_hat).max(0.0),
        u_hi: (c + q_hat).min(1.0),
        lower_rank: rank,
        upper_rank: rank,
    }
}
