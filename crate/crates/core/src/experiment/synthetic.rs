//! Replicated experiments on the synthetic process: `simulate` (no shift)
//! and `shift` (calibration and test responses moved by each δ while the
//! fitted models stay fixed).
//!
//! Test points use a fixed, stratified set of `x₁` values drawn once from
//! the master seed; every replication redraws the other covariates and the
//! noise.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng as _;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{Method, RunConfig, ZChoice};
use super::output::{fmt_f, fmt_opt, Table};
use super::{fit_baseline, worker_pool, FittedBaseline};
use crate::cdf::{fit_hazard_cdf, CdfModel, HazardCdf};
use crate::conformal::{compute_pits, fit_amortized_z, predict_pit_intervals, Interval, PitMethod, SwapCounter, ZStrategy};
use crate::error::Result;
use crate::eval::{binned_metrics, coverage_and_width, mean_sd, smooth_conditional, BinSpec};
use crate::rng::{derive_seed, rng_from_seed};
use crate::synth::{noise_variance, sample_dgp, sample_dgp_at_x1};
use crate::tensor_nn::{MlpConfig, TrainConfig};

/// Per-test-point outcome, aligned with the fixed `x₁` design.
#[derive(Debug, Clone)]
struct Cell {
    covered: Vec<bool>,
    widths: Vec<f64>,
}

#[derive(Debug, Default, Clone)]
struct RepMeta {
    hazard_epochs: usize,
    swaps: BTreeMap<Method, usize>,
}

struct RepOutput {
    /// Indexed `[delta][method]`.
    cells: Vec<Vec<Cell>>,
    meta: RepMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SyntheticMarginal {
    pub delta: f64,
    pub method: Method,
    pub replications: usize,
    pub coverage: f64,
    /// Spread of the per-replication coverage.
    pub coverage_rep_sd: f64,
    /// Spread over the fixed `x₁` values of coverage averaged across replications.
    pub coverage_x1_sd: f64,
    pub mean_width: f64,
    /// Mean over replications of the within-replication width spread.
    pub width_sd: f64,
    /// Width spread over all test points of all replications.
    pub pooled_width_sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SyntheticBin {
    pub delta: f64,
    pub method: Method,
    pub bin: String,
    pub count: usize,
    pub coverage: Option<f64>,
    pub mean_width: Option<f64>,
    pub width_sd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub delta: f64,
    pub method: Method,
    pub kind: &'static str,
    pub x1: f64,
    pub coverage: f64,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SyntheticMeta {
    pub test_x1: Vec<f64>,
    pub mean_hazard_epochs: f64,
    pub swapped_intervals: BTreeMap<Method, usize>,
    pub bandwidth: f64,
    pub widened_grid_points: usize,
    pub seed_scheme: &'static str,
    pub dcp_z_objective: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SyntheticResult {
    pub marginal: Vec<SyntheticMarginal>,
    pub binned: Vec<SyntheticBin>,
    pub curves: Vec<CurvePoint>,
    pub meta: SyntheticMeta,
}

impl SyntheticResult {
    pub fn marginal_for(&self, delta: f64, method: Method) -> Option<&SyntheticMarginal> {
        self.marginal.iter().find(|m| m.method == method && m.delta == delta)
    }

    pub fn bin_for(&self, delta: f64, method: Method, bin: &str) -> Option<&SyntheticBin> {
        self.binned.iter().find(|b| b.method == method && b.delta == delta && b.bin == bin)
    }
}

pub(crate) fn hazard_configs(cfg: &RunConfig, label: &str, r: u64) -> (MlpConfig, TrainConfig) {
    (
        MlpConfig::new(0, vec![64, 64], 0, derive_seed(cfg.seed, &format!("{label}/hazard-init"), r)),
        TrainConfig::density_default(derive_seed(cfg.seed, &format!("{label}/hazard-train"), r)).capped(cfg.max_epochs),
    )
}

pub(crate) fn z_strategy(cfg: &RunConfig, model: &HazardCdf, train: &crate::datapipe::Dataset, label: &str, r: u64) -> Result<ZStrategy> {
    Ok(match cfg.z_strategy {
        ZChoice::Fixed(z) => ZStrategy::Fixed(z),
        ZChoice::Grid => ZStrategy::GridPerTest {
            grid_points: cfg.grid_points,
        },
        ZChoice::Amortized => {
            let mlp = MlpConfig::new(0, vec![32, 32], 0, derive_seed(cfg.seed, &format!("{label}/z-init"), r));
            let tc = TrainConfig::baseline_default(derive_seed(cfg.seed, &format!("{label}/z-train"), r)).capped(cfg.max_epochs);
            ZStrategy::Amortized(Box::new(fit_amortized_z(model, train, cfg.alpha, &mlp, &tc)?.0))
        }
    })
}

fn cell(intervals: &[Interval], y: &[f64]) -> Cell {
    Cell {
        covered: intervals.iter().zip(y).map(|(i, y)| i.contains(*y)).collect(),
        widths: intervals.iter().map(Interval::width).collect(),
    }
}

fn replication(cfg: &RunConfig, label: &str, x1s: &[f64], r: usize) -> Result<RepOutput> {
    let r = r as u64;
    let seed = |what: &str| derive_seed(cfg.seed, &format!("{label}/{what}"), r);
    let train = sample_dgp(cfg.n_train, 0.0, seed("train"))?;
    let mut meta = RepMeta::default();

    let cdf_methods: Vec<Method> = cfg.methods.iter().copied().filter(|m| m.uses_cdf()).collect();
    let hazard = if cdf_methods.is_empty() {
        None
    } else {
        let (mlp, tc) = hazard_configs(cfg, label, r);
        let (model, report) = fit_hazard_cdf(&train, &mlp, &tc, cfg.bins)?;
        meta.hazard_epochs = report.epochs_run;
        let strategy = z_strategy(cfg, &model, &train, label, r)?;
        Some((Arc::new(model), strategy))
    };
    let mut baselines: Vec<(Method, FittedBaseline)> = Vec::new();
    for &m in cfg.methods.iter().filter(|m| !m.uses_cdf()) {
        baselines.push((m, fit_baseline(m, &train, cfg, false, &format!("{label}/{}", m.name()), r)?));
    }

    let mut cells = Vec::with_capacity(cfg.deltas.len());
    for &delta in &cfg.deltas {
        // the same draws are reused for every δ, so shifts are paired
        let cal = sample_dgp(cfg.n_cal, delta, seed("cal"))?;
        let test = sample_dgp_at_x1(x1s, delta, seed("test"))?;
        let state = match &hazard {
            Some((model, _)) => Some(compute_pits(model.as_ref() as &dyn CdfModel, &cal, seed("ties"))?),
            None => None,
        };
        let mut row = Vec::with_capacity(cfg.methods.len());
        for &m in &cfg.methods {
            let intervals = if m.uses_cdf() {
                let (model, strategy) = hazard.as_ref().expect("fitted when a CDF method is requested");
                let swaps = SwapCounter::default();
                let method = if m == Method::Cpi { PitMethod::Cpi } else { PitMethod::Dcp };
                let preds = predict_pit_intervals(
                    method,
                    model.as_ref(),
                    state.as_ref().expect("computed with the model"),
                    strategy,
                    cfg.alpha,
                    &test.features,
                    &swaps,
                )?;
                *meta.swaps.entry(m).or_default() += swaps.get();
                preds.into_iter().map(|p| p.interval).collect::<Vec<_>>()
            } else {
                let (_, fitted) = baselines.iter().find(|(b, _)| *b == m).expect("fitted above");
                let p = fitted.calibrated(&cal)?;
                let iv = p.predict_many(&test.features)?;
                *meta.swaps.entry(m).or_default() += p.swapped_intervals();
                iv
            };
            row.push(cell(&intervals, &test.responses));
        }
        cells.push(row);
    }
    Ok(RepOutput { cells, meta })
}

/// The fixed test design: one uniform draw inside each of `n_test` equal
/// strata of `(0, 1)`, so every point is marginally uniform while the
/// design as a whole matches the `x₁` law closely.
pub fn fixed_x1_design(cfg: &RunConfig, label: &str) -> Vec<f64> {
    let mut rng = rng_from_seed(derive_seed(cfg.seed, &format!("{label}/x1"), 0));
    let n = cfg.n_test as f64;
    (0..cfg.n_test).map(|i| (i as f64 + rng.random::<f64>()) / n).collect()
}

pub fn run_synthetic(cfg: &RunConfig) -> Result<SyntheticResult> {
    cfg.validate()?;
    let label = cfg.experiment.label();
    let x1s = fixed_x1_design(cfg, label);
    let reps: Vec<RepOutput> = worker_pool(cfg.workers)?.install(|| {
        (0..cfg.replications)
            .into_par_iter()
            .map(|r| replication(cfg, label, &x1s, r))
            .collect::<Result<Vec<_>>>()
    })?;

    let spec = BinSpec::unit_fifths();
    let grid: Vec<f64> = (0..cfg.curve_points).map(|i| i as f64 / (cfg.curve_points - 1) as f64).collect();
    let n_rep = reps.len();
    let mut marginal = Vec::new();
    let mut binned = Vec::new();
    let mut curves = Vec::new();
    let mut bandwidth = 0.0;
    let mut widened = 0;

    for (di, &delta) in cfg.deltas.iter().enumerate() {
        for (mi, &method) in cfg.methods.iter().enumerate() {
            let cells: Vec<&Cell> = reps.iter().map(|r| &r.cells[di][mi]).collect();
            let mut rep_cov = Vec::with_capacity(n_rep);
            let mut rep_w = Vec::with_capacity(n_rep);
            let mut rep_sd = Vec::with_capacity(n_rep);
            for c in &cells {
                let cov = c.covered.iter().filter(|b| **b).count() as f64 / c.covered.len() as f64;
                let (w, s) = mean_sd(&c.widths);
                rep_cov.push(cov);
                rep_w.push(w);
                rep_sd.push(s);
            }
            let per_x1_cov: Vec<f64> = (0..x1s.len())
                .map(|i| cells.iter().filter(|c| c.covered[i]).count() as f64 / n_rep as f64)
                .collect();
            let per_x1_w: Vec<f64> = (0..x1s.len())
                .map(|i| cells.iter().map(|c| c.widths[i]).sum::<f64>() / n_rep as f64)
                .collect();

            // pooled across replications
            let by: Vec<f64> = cells.iter().flat_map(|_| x1s.iter().copied()).collect();
            let intervals: Vec<Interval> = cells
                .iter()
                .flat_map(|c| c.widths.iter().map(|w| Interval { lo: 0.0, hi: *w }))
                .collect();
            // covered points get y = 0 (inside), missed ones y = −1 (outside)
            let ys: Vec<f64> = cells
                .iter()
                .flat_map(|c| c.covered.iter().map(|&b| if b { 0.0 } else { -1.0 }))
                .collect();
            let pooled = coverage_and_width(&intervals, &ys)?;

            marginal.push(SyntheticMarginal {
                delta,
                method,
                replications: n_rep,
                coverage: mean_sd(&rep_cov).0,
                coverage_rep_sd: mean_sd(&rep_cov).1,
                coverage_x1_sd: mean_sd(&per_x1_cov).1,
                mean_width: mean_sd(&rep_w).0,
                width_sd: mean_sd(&rep_sd).0,
                pooled_width_sd: pooled.width_sd,
            });
            for s in binned_metrics(&by, &intervals, &ys, &spec)? {
                binned.push(SyntheticBin {
                    delta,
                    method,
                    bin: s.label,
                    count: s.count,
                    coverage: s.metrics.map(|m| m.coverage),
                    mean_width: s.metrics.map(|m| m.mean_width),
                    width_sd: s.metrics.map(|m| m.width_sd),
                });
            }
            binned.push(SyntheticBin {
                delta,
                method,
                bin: "Marginal".into(),
                count: pooled.n,
                coverage: Some(pooled.coverage),
                mean_width: Some(pooled.mean_width),
                width_sd: Some(pooled.width_sd),
            });

            for i in 0..x1s.len() {
                curves.push(CurvePoint {
                    delta,
                    method,
                    kind: "raw",
                    x1: x1s[i],
                    coverage: per_x1_cov[i],
                    width: per_x1_w[i],
                });
            }
            if x1s.len() >= 2 {
                let cov_curve = smooth_conditional(&x1s, &per_x1_cov, &grid)?;
                let w_curve = smooth_conditional(&x1s, &per_x1_w, &grid)?;
                bandwidth = cov_curve.bandwidth;
                widened += cov_curve.widened.iter().filter(|b| **b).count();
                for (k, &g) in grid.iter().enumerate() {
                    curves.push(CurvePoint {
                        delta,
                        method,
                        kind: "smoothed",
                        x1: g,
                        coverage: cov_curve.values[k],
                        width: w_curve.values[k],
                    });
                }
            }
        }
    }

    let mut swapped: BTreeMap<Method, usize> = BTreeMap::new();
    for r in &reps {
        for (m, n) in &r.meta.swaps {
            *swapped.entry(*m).or_default() += n;
        }
    }
    let meta = SyntheticMeta {
        test_x1: x1s,
        mean_hazard_epochs: reps.iter().map(|r| r.meta.hazard_epochs as f64).sum::<f64>() / n_rep as f64,
        swapped_intervals: swapped,
        bandwidth,
        widened_grid_points: widened,
        seed_scheme: "derive_seed(master, '<experiment>/<stream>', replication)",
        dcp_z_objective: "same estimated quantile-difference length as CPI",
    };
    Ok(SyntheticResult {
        marginal,
        binned,
        curves,
        meta,
    })
}

fn reduction(cpi: Option<f64>, dcp: Option<f64>) -> Option<f64> {
    Some(1.0 - cpi? / dcp?)
}

pub fn synthetic_tables(res: &SyntheticResult) -> (Table, Table, Table) {
    let mut marginal = Table::new(&[
        "delta",
        "method",
        "replications",
        "coverage",
        "coverage_rep_sd",
        "coverage_x1_sd",
        "mean_width",
        "width_sd",
        "pooled_width_sd",
        "reduction",
    ]);
    for m in &res.marginal {
        let red = if m.method == Method::Cpi {
            reduction(
                Some(m.mean_width),
                res.marginal_for(m.delta, Method::Dcp).map(|d| d.mean_width),
            )
        } else {
            None
        };
        marginal.push(vec![
            fmt_f(m.delta),
            m.method.name().into(),
            m.replications.to_string(),
            fmt_f(m.coverage),
            fmt_f(m.coverage_rep_sd),
            fmt_f(m.coverage_x1_sd),
            fmt_f(m.mean_width),
            fmt_f(m.width_sd),
            fmt_f(m.pooled_width_sd),
            fmt_opt(red),
        ]);
    }
    let mut binned = Table::new(&["delta", "method", "x1_bin", "count", "coverage", "mean_width", "width_sd", "reduction"]);
    for b in &res.binned {
        let red = if b.method == Method::Cpi {
            reduction(b.mean_width, res.bin_for(b.delta, Method::Dcp, &b.bin).and_then(|d| d.mean_width))
        } else {
            None
        };
        binned.push(vec![
            fmt_f(b.delta),
            b.method.name().into(),
            b.bin.clone(),
            b.count.to_string(),
            fmt_opt(b.coverage),
            fmt_opt(b.mean_width),
            fmt_opt(b.width_sd),
            fmt_opt(red),
        ]);
    }
    let mut curves = Table::new(&["delta", "method", "kind", "x1", "coverage", "width", "noise_sd"]);
    for c in &res.curves {
        curves.push(vec![
            fmt_f(c.delta),
            c.method.name().into(),
            c.kind.into(),
            fmt_f(c.x1),
            fmt_f(c.coverage),
            fmt_f(c.width),
            fmt_f(noise_variance(c.x1).sqrt()),
        ]);
    }
    (marginal, binned, curves)
}
