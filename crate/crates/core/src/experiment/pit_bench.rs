//! Calibration directly in PIT space: draws calibration PITs from a Beta
//! law and compares CPI and DCP cutoffs over a list of starting points.

use rayon::prelude::*;
use serde::Serialize;

use super::config::{Method, RunConfig};
use super::output::{fmt_f, Table};
use super::worker_pool;
use crate::cdf::BetaCdf;
use crate::conformal::{CalibrationState, PitMethod};
use crate::error::Result;
use crate::eval::mean_sd;
use crate::rng::derive_seed;
use crate::synth::sample_beta_pits;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PitBenchRow {
    pub z: f64,
    pub method: Method,
    pub replications: usize,
    /// Mean over replications of the exact coverage `F(u_hi) − F(u_lo)`.
    pub coverage: f64,
    pub coverage_sd: f64,
    pub length: f64,
    pub length_sd: f64,
    pub mean_u_lo: f64,
    pub mean_u_hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PitBenchResult {
    pub rows: Vec<PitBenchRow>,
}

impl PitBenchResult {
    pub fn row(&self, z: f64, method: Method) -> Option<&PitBenchRow> {
        self.rows.iter().find(|r| r.method == method && (r.z - z).abs() < 1e-12)
    }

    /// `1 − len(CPI)/len(DCP)` at `z`.
    pub fn reduction(&self, z: f64) -> Option<f64> {
        Some(1.0 - self.row(z, Method::Cpi)?.length / self.row(z, Method::Dcp)?.length)
    }
}

/// `(coverage, length, u_lo, u_hi)` per z and method for one replication.
type RepCells = Vec<[f64; 4]>;

pub fn run_pit_bench(cfg: &RunConfig) -> Result<PitBenchResult> {
    cfg.validate()?;
    let truth = BetaCdf::new(cfg.beta_a, cfg.beta_b, 0)?;
    let methods: Vec<PitMethod> = cfg
        .methods
        .iter()
        .map(|m| if *m == Method::Cpi { PitMethod::Cpi } else { PitMethod::Dcp })
        .collect();
    let one = |r: usize| -> Result<RepCells> {
        let seed = derive_seed(cfg.seed, "pit-bench/pits", r as u64);
        let pits = sample_beta_pits(cfg.n_cal, cfg.beta_a, cfg.beta_b, seed)?;
        let state = CalibrationState::from_pits(pits, derive_seed(cfg.seed, "pit-bench/ties", r as u64))?;
        let mut cells = Vec::with_capacity(cfg.z_values.len() * methods.len());
        for &z in &cfg.z_values {
            for m in &methods {
                let c = m.cutoffs(&state, cfg.alpha, z)?;
                let cov = truth.cdf_at(c.u_hi) - truth.cdf_at(c.u_lo);
                cells.push([cov, c.length(), c.u_lo, c.u_hi]);
            }
        }
        Ok(cells)
    };
    let reps: Vec<RepCells> = worker_pool(cfg.workers)?.install(|| {
        (0..cfg.replications).into_par_iter().map(one).collect::<Result<Vec<_>>>()
    })?;

    let mut rows = Vec::new();
    let mut k = 0;
    for &z in &cfg.z_values {
        for &method in &cfg.methods {
            let col = |j: usize| reps.iter().map(|r| r[k][j]).collect::<Vec<f64>>();
            let (coverage, coverage_sd) = mean_sd(&col(0));
            let (length, length_sd) = mean_sd(&col(1));
            rows.push(PitBenchRow {
                z,
                method,
                replications: cfg.replications,
                coverage,
                coverage_sd,
                length,
                length_sd,
                mean_u_lo: mean_sd(&col(2)).0,
                mean_u_hi: mean_sd(&col(3)).0,
            });
            k += 1;
        }
    }
    Ok(PitBenchResult { rows })
}

/// Tables for the run directory; sd columns are left out for a single replication.
pub fn pit_bench_tables(res: &PitBenchResult) -> (Table, Table, Table) {
    let single = res.rows.first().is_some_and(|r| r.replications == 1);
    let mut marginal = if single {
        Table::new(&["z", "method", "replications", "coverage", "length", "reduction"])
    } else {
        Table::new(&["z", "method", "replications", "coverage", "coverage_sd", "length", "length_sd", "reduction"])
    };
    for r in &res.rows {
        let red = if r.method == Method::Cpi {
            res.reduction(r.z).map(fmt_f).unwrap_or_default()
        } else {
            String::new()
        };
        let mut row = vec![fmt_f(r.z), r.method.name().into(), r.replications.to_string(), fmt_f(r.coverage)];
        if !single {
            row.push(fmt_f(r.coverage_sd));
        }
        row.push(fmt_f(r.length));
        if !single {
            row.push(fmt_f(r.length_sd));
        }
        row.push(red);
        marginal.push(row);
    }
    let binned = Table::new(&["z", "method", "bin", "count", "coverage", "mean_width", "width_sd"]);
    let mut curves = Table::new(&["z", "method", "mean_u_lo", "mean_u_hi"]);
    for r in &res.rows {
        curves.push(vec![fmt_f(r.z), r.method.name().into(), fmt_f(r.mean_u_lo), fmt_f(r.mean_u_hi)]);
    }
    (marginal, binned, curves)
}
