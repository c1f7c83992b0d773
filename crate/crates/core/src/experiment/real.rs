//! Tabular-data pipeline: repeated 45/35/20 partitions of one CSV, every
//! method fitted per partition, and metrics by PC1 quartile group.

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{Method, RunConfig};
use super::output::{fmt_f, Table};
use super::synthetic::{hazard_configs, z_strategy};
use super::{fit_baseline, worker_pool};
use crate::cdf::{fit_hazard_cdf, CdfModel};
use crate::conformal::{compute_pits, predict_pit_intervals, Interval, PitMethod, SwapCounter};
use crate::datapipe::{load_csv, split, Dataset, SplitSpec};
use crate::error::{Error, Result};
use crate::eval::{coverage_and_width, grouped_metrics, mean_sd, pc1_groups};
use crate::rng::derive_seed;

pub const PC1_GROUPS: usize = 4;

/// One method on one partition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartitionMethod {
    pub partition: usize,
    pub method: Method,
    pub coverage: f64,
    pub mean_width: f64,
    /// `(coverage, mean width)` per PC1 group; `None` for an empty group.
    pub groups: Vec<Option<(f64, f64)>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RealMarginalRow {
    pub method: Method,
    pub partitions: usize,
    pub coverage: f64,
    pub coverage_sd: f64,
    pub mean_width: f64,
    pub mean_width_sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RealGroupRow {
    pub method: Method,
    pub group: usize,
    /// Partitions where the group was non-empty.
    pub partitions: usize,
    pub coverage: f64,
    pub mean_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RealMeta {
    pub source: String,
    pub rows: usize,
    pub rejected_rows: usize,
    pub features: usize,
    /// Constant training columns left out of PC1, summed over partitions.
    pub dropped_constant_columns: usize,
    pub swapped_intervals: BTreeMap<Method, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RealResult {
    pub marginal: Vec<RealMarginalRow>,
    pub groups: Vec<RealGroupRow>,
    pub partitions: Vec<PartitionMethod>,
    pub meta: RealMeta,
}

impl RealResult {
    pub fn marginal_for(&self, method: Method) -> Option<&RealMarginalRow> {
        self.marginal.iter().find(|m| m.method == method)
    }

    pub fn group_for(&self, method: Method, group: usize) -> Option<&RealGroupRow> {
        self.groups.iter().find(|g| g.method == method && g.group == group)
    }
}

struct PartitionOutput {
    rows: Vec<PartitionMethod>,
    dropped: usize,
    swaps: BTreeMap<Method, usize>,
}

fn partition(cfg: &RunConfig, data: &Dataset, r: usize) -> Result<PartitionOutput> {
    let ri = r as u64;
    let (train, cal, test) = split(data, &SplitSpec::standard(derive_seed(cfg.seed, "real/split", ri)))?;
    let (labels, pc) = pc1_groups(&train.features, &test.features, derive_seed(cfg.seed, "real/pc1", ri))?;
    let mut swaps = BTreeMap::new();

    let hazard = if cfg.methods.iter().any(|m| m.uses_cdf()) {
        let (mlp, tc) = hazard_configs(cfg, "real", ri);
        let model = Arc::new(fit_hazard_cdf(&train, &mlp, &tc, cfg.bins)?.0);
        let strategy = z_strategy(cfg, &model, &train, "real", ri)?;
        let state = compute_pits(model.as_ref() as &dyn CdfModel, &cal, derive_seed(cfg.seed, "real/ties", ri))?;
        Some((model, strategy, state))
    } else {
        None
    };

    let mut rows = Vec::with_capacity(cfg.methods.len());
    for &m in &cfg.methods {
        let intervals: Vec<Interval> = if m.uses_cdf() {
            let (model, strategy, state) = hazard.as_ref().expect("fitted when a CDF method is requested");
            let counter = SwapCounter::default();
            let method = if m == Method::Cpi { PitMethod::Cpi } else { PitMethod::Dcp };
            let preds = predict_pit_intervals(method, model.as_ref(), state, strategy, cfg.alpha, &test.features, &counter)?;
            *swaps.entry(m).or_default() += counter.get();
            preds.into_iter().map(|p| p.interval).collect()
        } else {
            let fitted = fit_baseline(m, &train, cfg, true, &format!("real/{}", m.name()), ri)?;
            let p = fitted.calibrated(&cal)?;
            let iv = p.predict_many(&test.features)?;
            *swaps.entry(m).or_default() += p.swapped_intervals();
            iv
        };
        let all = coverage_and_width(&intervals, &test.responses)?;
        let groups = grouped_metrics(&labels, PC1_GROUPS, &intervals, &test.responses)?
            .into_iter()
            .map(|s| s.metrics.map(|g| (g.coverage, g.mean_width)))
            .collect();
        rows.push(PartitionMethod {
            partition: r,
            method: m,
            coverage: all.coverage,
            mean_width: all.mean_width,
            groups,
        });
    }
    Ok(PartitionOutput {
        rows,
        dropped: train.dim() - pc.kept.len(),
        swaps,
    })
}

/// Runs every configured method on `cfg.replications` random partitions
/// of the CSV at `cfg.csv`.
pub fn run_real(cfg: &RunConfig) -> Result<RealResult> {
    cfg.validate()?;
    let path = cfg.csv.as_ref().ok_or_else(|| Error::config("csv", "required for the real experiment"))?;
    let data = load_csv(path, &cfg.response)?;
    run_real_on(cfg, &data)
}

/// [`run_real`] on data already in memory.
pub fn run_real_on(cfg: &RunConfig, data: &Dataset) -> Result<RealResult> {
    let parts: Vec<PartitionOutput> = worker_pool(cfg.workers)?.install(|| {
        (0..cfg.replications)
            .into_par_iter()
            .map(|r| partition(cfg, data, r))
            .collect::<Result<Vec<_>>>()
    })?;

    let mut marginal = Vec::new();
    let mut groups = Vec::new();
    for &m in &cfg.methods {
        let rows: Vec<&PartitionMethod> = parts.iter().flat_map(|p| p.rows.iter()).filter(|r| r.method == m).collect();
        let (coverage, coverage_sd) = mean_sd(&rows.iter().map(|r| r.coverage).collect::<Vec<_>>());
        let (mean_width, mean_width_sd) = mean_sd(&rows.iter().map(|r| r.mean_width).collect::<Vec<_>>());
        marginal.push(RealMarginalRow {
            method: m,
            partitions: rows.len(),
            coverage,
            coverage_sd,
            mean_width,
            mean_width_sd,
        });
        for g in 0..PC1_GROUPS {
            let vals: Vec<(f64, f64)> = rows.iter().filter_map(|r| r.groups[g]).collect();
            if vals.is_empty() {
                continue;
            }
            let k = vals.len() as f64;
            groups.push(RealGroupRow {
                method: m,
                group: g + 1,
                partitions: vals.len(),
                coverage: vals.iter().map(|v| v.0).sum::<f64>() / k,
                mean_width: vals.iter().map(|v| v.1).sum::<f64>() / k,
            });
        }
    }

    let mut swapped: BTreeMap<Method, usize> = BTreeMap::new();
    for p in &parts {
        for (m, n) in &p.swaps {
            *swapped.entry(*m).or_default() += n;
        }
    }
    let meta = RealMeta {
        source: data.source.clone(),
        rows: data.len(),
        rejected_rows: data.rejected_rows,
        features: data.dim(),
        dropped_constant_columns: parts.iter().map(|p| p.dropped).sum(),
        swapped_intervals: swapped,
    };
    Ok(RealResult {
        marginal,
        groups,
        partitions: parts.into_iter().flat_map(|p| p.rows).collect(),
        meta,
    })
}

/// Marginal table, PC1 group table, and per-partition group scatter rows.
pub fn real_tables(res: &RealResult) -> (Table, Table, Table) {
    let mut marginal = Table::new(&["method", "partitions", "coverage", "coverage_sd", "mean_width", "mean_width_sd"]);
    for m in &res.marginal {
        marginal.push(vec![
            m.method.name().into(),
            m.partitions.to_string(),
            fmt_f(m.coverage),
            fmt_f(m.coverage_sd),
            fmt_f(m.mean_width),
            fmt_f(m.mean_width_sd),
        ]);
    }
    let mut binned = Table::new(&["method", "pc1_group", "partitions", "coverage", "mean_width"]);
    for g in &res.groups {
        binned.push(vec![
            g.method.name().into(),
            g.group.to_string(),
            g.partitions.to_string(),
            fmt_f(g.coverage),
            fmt_f(g.mean_width),
        ]);
    }
    let mut scatter = Table::new(&["partition", "method", "pc1_group", "coverage", "mean_width"]);
    for p in &res.partitions {
        for (g, v) in p.groups.iter().enumerate() {
            if let Some((c, w)) = v {
                scatter.push(vec![
                    p.partition.to_string(),
                    p.method.name().into(),
                    (g + 1).to_string(),
                    fmt_f(*c),
                    fmt_f(*w),
                ]);
            }
        }
    }
    (marginal, binned, scatter)
}
