//! Experiment runners behind the command line: the PIT benchmark, the
//! synthetic simulation, the location-shift study and the tabular-data
//! pipeline.

mod config;
mod output;
mod pit_bench;
mod real;
mod synthetic;

use std::path::PathBuf;

pub use config::{Experiment, Method, RunConfig, ZChoice};
pub use output::{fmt_f, fmt_opt, write_run, Table, VERSION};
pub use pit_bench::{pit_bench_tables, run_pit_bench, PitBenchResult, PitBenchRow};
pub use real::{real_tables, run_real, run_real_on, PartitionMethod, RealGroupRow, RealMarginalRow, RealMeta, RealResult, PC1_GROUPS};
pub use synthetic::{
    fixed_x1_design, run_synthetic, synthetic_tables, CurvePoint, SyntheticBin, SyntheticMarginal, SyntheticMeta,
    SyntheticResult,
};

use crate::baselines::{fit_cqr, fit_rescaled, fit_residual, CqrPredictor, RescaledPredictor, ResidualPredictor};
use crate::conformal::IntervalPredictor;
use crate::datapipe::Dataset;
use crate::error::{Error, Result};
use crate::rng::derive_seed;
use crate::tensor_nn::{MlpConfig, TrainConfig};

pub(crate) fn worker_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::config("workers", e.to_string()))
}

/// A trained but uncalibrated baseline.
#[derive(Debug, Clone)]
pub enum FittedBaseline {
    Residual(ResidualPredictor),
    Rescaled(RescaledPredictor),
    Cqr(CqrPredictor),
}

impl FittedBaseline {
    /// A calibrated copy; the trained network is shared by value.
    pub fn calibrated(&self, cal: &Dataset) -> Result<Box<dyn IntervalPredictor>> {
        let mut p: Box<dyn IntervalPredictor> = match self {
            FittedBaseline::Residual(p) => Box::new(p.clone()),
            FittedBaseline::Rescaled(p) => Box::new(p.clone()),
            FittedBaseline::Cqr(p) => Box::new(p.clone()),
        };
        p.calibrate(cal)?;
        Ok(p)
    }
}

/// Trains the baseline for `method` with the network sizes and optimiser
/// settings of the synthetic studies, or of the tabular study when `tabular`.
pub(crate) fn fit_baseline(
    method: Method,
    train: &Dataset,
    cfg: &RunConfig,
    tabular: bool,
    label: &str,
    r: u64,
) -> Result<FittedBaseline> {
    let hidden = match (method, tabular) {
        (Method::Residual, _) | (Method::Rescaled, false) => vec![32, 32],
        (Method::Cqr, false) => vec![16, 16],
        (Method::Rescaled | Method::Cqr, true) => vec![48, 48],
        (Method::Cpi | Method::Dcp, _) => return Err(Error::config("methods", "not a baseline")),
    };
    let mlp = MlpConfig::new(0, hidden, 0, derive_seed(cfg.seed, &format!("{label}/init"), r));
    let tseed = derive_seed(cfg.seed, &format!("{label}/train"), r);
    let tc = if tabular {
        TrainConfig::baseline_real_data(tseed)
    } else {
        TrainConfig::baseline_default(tseed)
    }
    .capped(cfg.max_epochs);
    Ok(match method {
        Method::Residual => FittedBaseline::Residual(fit_residual(train, &mlp, &tc, cfg.alpha)?.0),
        Method::Rescaled => FittedBaseline::Rescaled(fit_rescaled(train, &mlp, &tc, cfg.alpha)?.0),
        _ => FittedBaseline::Cqr(fit_cqr(train, &mlp, &tc, cfg.alpha)?.0),
    })
}

/// Runs the configured experiment and writes its report directory.
pub fn run(cfg: &RunConfig) -> Result<PathBuf> {
    cfg.validate()?;
    match cfg.experiment {
        Experiment::PitBench => {
            let res = run_pit_bench(cfg)?;
            let (m, b, c) = pit_bench_tables(&res);
            write_run(cfg, &serde_json::json!({ "rows": res.rows.len() }), &m, &b, &c)
        }
        Experiment::Simulate | Experiment::Shift => {
            let res = run_synthetic(cfg)?;
            let (m, b, c) = synthetic_tables(&res);
            write_run(cfg, &res.meta, &m, &b, &c)
        }
        Experiment::Real => {
            let res = run_real(cfg)?;
            let (m, b, c) = real_tables(&res);
            write_run(cfg, &res.meta, &m, &b, &c)
        }
    }
}
