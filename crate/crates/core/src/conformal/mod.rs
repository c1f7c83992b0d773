//! PIT calibration and the CPI / DCP interval constructions.

mod calibration;
mod cutoffs;
mod interval;
mod predict;
mod zchoice;

pub use calibration::{compute_pits, CalibrationState, PIT_CLAMP};
pub use cutoffs::{
    conformal_rank, cpi_cutoffs, dcp_center, dcp_cutoffs, rank_indices, ConformalQuantile, PitCutoffs,
    RankIndices,
};
pub use interval::{Interval, IntervalPredictor, SwapCounter};
pub use predict::{
    predict_interval_cpi, predict_interval_dcp, predict_pit_intervals, PitMethod, PitPrediction, PitPredictor,
};
pub use zchoice::{
    fit_amortized_z, optimal_z_for, optimal_z_grid, optimal_z_targets, train_amortized_z, z_grid, AmortizedZ,
    ZStrategy, ZStrategyKind, DEFAULT_GRID_POINTS, GRID_EDGE,
};
