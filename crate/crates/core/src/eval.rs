//! Coverage and width metrics, stratified summaries, kernel smoothing,
//! PC1 grouping, and a one-sample Kolmogorov–Smirnov test.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::conformal::Interval;
use crate::datapipe::Standardizer;
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;
use crate::tensor_nn::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageWidth {
    pub n: usize,
    pub coverage: f64,
    pub mean_width: f64,
    /// Population standard deviation of the widths.
    pub width_sd: f64,
}

/// Mean and population standard deviation; exactly 0 when all values agree.
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.iter().all(|v| *v == values[0]) {
        return (values[0], 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn coverage_and_width(intervals: &[Interval], y: &[f64]) -> Result<CoverageWidth> {
    if intervals.len() != y.len() {
        return Err(Error::DimensionMismatch {
            context: "intervals vs responses",
            expected: intervals.len(),
            actual: y.len(),
        });
    }
    if y.is_empty() {
        return Err(Error::EmptyData("coverage inputs"));
    }
    let hits = intervals.iter().zip(y).filter(|(i, y)| i.contains(**y)).count();
    let widths: Vec<f64> = intervals.iter().map(Interval::width).collect();
    let (mean_width, width_sd) = mean_sd(&widths);
    Ok(CoverageWidth {
        n: y.len(),
        coverage: hits as f64 / y.len() as f64,
        mean_width,
        width_sd,
    })
}

/// Metrics for one stratum; `metrics` is `None` for an empty stratum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumSummary {
    pub label: String,
    pub count: usize,
    pub metrics: Option<CoverageWidth>,
}

/// Bins `(e₀, e₁], (e₁, e₂], …` with the first bin closed on the left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinSpec {
    pub edges: Vec<f64>,
}

impl BinSpec {
    pub fn new(edges: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 || edges.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::config("bin edges", "need at least two strictly increasing edges"));
        }
        Ok(Self { edges })
    }

    /// Five equal bins on `[0, 1]`.
    pub fn unit_fifths() -> Self {
        Self {
            edges: vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0],
        }
    }

    pub fn bins(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn assign(&self, v: f64) -> Option<usize> {
        let e = &self.edges;
        if v == e[0] {
            return Some(0);
        }
        if !(v > e[0] && v <= e[e.len() - 1]) {
            return None;
        }
        Some(e.partition_point(|&edge| edge < v) - 1)
    }

    pub fn label(&self, b: usize) -> String {
        let open = if b == 0 { '[' } else { '(' };
        format!("{open}{}, {}]", self.edges[b], self.edges[b + 1])
    }
}

fn summarise(labels: Vec<String>, members: Vec<Vec<usize>>, intervals: &[Interval], y: &[f64]) -> Result<Vec<StratumSummary>> {
    labels
        .into_iter()
        .zip(members)
        .map(|(label, idx)| {
            let metrics = if idx.is_empty() {
                None
            } else {
                let iv: Vec<Interval> = idx.iter().map(|&i| intervals[i]).collect();
                let yy: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
                Some(coverage_and_width(&iv, &yy)?)
            };
            Ok(StratumSummary {
                label,
                count: idx.len(),
                metrics,
            })
        })
        .collect()
}

/// Per-bin metrics by the value of `by`. Every value must fall in a bin.
pub fn binned_metrics(by: &[f64], intervals: &[Interval], y: &[f64], spec: &BinSpec) -> Result<Vec<StratumSummary>> {
    if by.len() != y.len() || intervals.len() != y.len() {
        return Err(Error::DimensionMismatch {
            context: "binned metrics inputs",
            expected: y.len(),
            actual: by.len().min(intervals.len()),
        });
    }
    let mut members = vec![Vec::new(); spec.bins()];
    for (i, &v) in by.iter().enumerate() {
        let b = spec.assign(v).ok_or(Error::OutOfRange {
            name: "binning value",
            value: v,
            allowed: "within the bin edges",
        })?;
        members[b].push(i);
    }
    summarise((0..spec.bins()).map(|b| spec.label(b)).collect(), members, intervals, y)
}

/// Per-group metrics for labels `1..=groups`.
pub fn grouped_metrics(labels: &[usize], groups: usize, intervals: &[Interval], y: &[f64]) -> Result<Vec<StratumSummary>> {
    if labels.len() != y.len() || intervals.len() != y.len() {
        return Err(Error::DimensionMismatch {
            context: "grouped metrics inputs",
            expected: y.len(),
            actual: labels.len().min(intervals.len()),
        });
    }
    let mut members = vec![Vec::new(); groups];
    for (i, &g) in labels.iter().enumerate() {
        if g == 0 || g > groups {
            return Err(Error::OutOfRange {
                name: "group label",
                value: g as f64,
                allowed: "1..=groups",
            });
        }
        members[g - 1].push(i);
    }
    summarise((1..=groups).map(|g| format!("G{g}")).collect(), members, intervals, y)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothedCurve {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub bandwidth: f64,
    /// Grid points where the bandwidth had to be widened to find kernel mass.
    pub widened: Vec<bool>,
}

/// `1.06 · sd · n^(−1/5)` with the sample standard deviation.
pub fn silverman_bandwidth(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    1.06 * sd * n.powf(-0.2)
}

/// Gaussian-kernel Nadaraya–Watson regression of `values` on `xs`.
pub fn smooth_conditional(xs: &[f64], values: &[f64], grid: &[f64]) -> Result<SmoothedCurve> {
    smooth_with_bandwidth(xs, values, grid, None)
}

/// As [`smooth_conditional`] with an optional fixed bandwidth.
pub fn smooth_with_bandwidth(xs: &[f64], values: &[f64], grid: &[f64], bandwidth: Option<f64>) -> Result<SmoothedCurve> {
    if xs.len() != values.len() {
        return Err(Error::DimensionMismatch {
            context: "smoothing inputs",
            expected: xs.len(),
            actual: values.len(),
        });
    }
    if xs.len() < 2 || xs.iter().all(|x| *x == xs[0]) {
        return Err(Error::EmptyData("smoothing needs at least two distinct x values"));
    }
    let h = bandwidth.unwrap_or_else(|| silverman_bandwidth(xs));
    if !(h > 0.0) {
        return Err(Error::config("bandwidth", format!("must be positive, got {h}")));
    }
    let mut widened = vec![false; grid.len()];
    let mut out = Vec::with_capacity(grid.len());
    for (gi, &g) in grid.iter().enumerate() {
        let mut local = h;
        loop {
            let (mut num, mut den) = (0.0, 0.0);
            for (x, v) in xs.iter().zip(values) {
                let k = (-0.5 * ((g - x) / local).powi(2)).exp();
                num += k * v;
                den += k;
            }
            if den >= f64::MIN_POSITIVE {
                out.push(num / den);
                break;
            }
            widened[gi] = true;
            local *= 2.0;
        }
    }
    Ok(SmoothedCurve {
        grid: grid.to_vec(),
        values: out,
        bandwidth: h,
        widened,
    })
}

pub const POWER_TOL: f64 = 1e-10;
pub const POWER_MAX_ITER: usize = 10_000;

/// First principal component of standardized features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pc1 {
    pub standardizer: Standardizer,
    /// Feature columns used; constant training columns are dropped.
    pub kept: Vec<usize>,
    /// Unit direction over the kept columns, largest-magnitude entry positive.
    pub direction: Vec<f64>,
    pub eigenvalue: f64,
    pub iterations: usize,
}

impl Pc1 {
    pub fn fit(train: &Matrix, seed: u64) -> Result<Self> {
        if train.rows() < 2 {
            return Err(Error::EmptyData("PC1 needs at least two training rows"));
        }
        let standardizer = Standardizer::fit(train)?;
        let kept: Vec<usize> = (0..train.cols()).filter(|&j| !standardizer.constant[j]).collect();
        if kept.is_empty() {
            return Err(Error::Degenerate("every training feature is constant".into()));
        }
        let z = standardizer.apply(train)?;
        let d = kept.len();
        let n = train.rows() as f64;
        let mut cov = vec![0.0; d * d];
        for i in 0..train.rows() {
            let row = z.row(i);
            for (a, &ja) in kept.iter().enumerate() {
                for (b, &jb) in kept.iter().enumerate().skip(a) {
                    cov[a * d + b] += row[ja] * row[jb];
                }
            }
        }
        for a in 0..d {
            for b in a..d {
                cov[a * d + b] /= n;
                cov[b * d + a] = cov[a * d + b];
            }
        }
        let (direction, eigenvalue, iterations) = power_iteration(&cov, d, seed)?;
        Ok(Self {
            standardizer,
            kept,
            direction,
            eigenvalue,
            iterations,
        })
    }

    pub fn project(&self, x: &Matrix) -> Result<Vec<f64>> {
        let z = self.standardizer.apply(x)?;
        Ok((0..z.rows())
            .map(|i| self.kept.iter().zip(&self.direction).map(|(&j, v)| z.get(i, j) * v).sum())
            .collect())
    }
}

/// Leading eigenpair of a symmetric `d × d` row-major matrix.
pub fn power_iteration(m: &[f64], d: usize, seed: u64) -> Result<(Vec<f64>, f64, usize)> {
    let mut rng = rng_from_seed(seed);
    let mut v: Vec<f64> = (0..d).map(|_| rng.random::<f64>() - 0.5).collect();
    normalize(&mut v);
    let matvec = |v: &[f64]| -> Vec<f64> { (0..d).map(|i| (0..d).map(|j| m[i * d + j] * v[j]).sum()).collect() };
    let scale = m.iter().fold(0.0f64, |a, b| a.max(b.abs())).max(1e-300);
    let mut residual = f64::INFINITY;
    for it in 1..=POWER_MAX_ITER {
        let w = matvec(&v);
        let lambda: f64 = w.iter().zip(&v).map(|(a, b)| a * b).sum();
        residual = w.iter().zip(&v).map(|(a, b)| (a - lambda * b).powi(2)).sum::<f64>().sqrt();
        if residual <= POWER_TOL * scale {
            orient(&mut v);
            return Ok((v, lambda, it));
        }
        v = w;
        if normalize(&mut v) == 0.0 {
            // v landed in the null space; every direction is an eigenvector of 0
            let mut e = vec![0.0; d];
            e[0] = 1.0;
            return Ok((e, 0.0, it));
        }
    }
    Err(Error::NoConvergence {
        iterations: POWER_MAX_ITER,
        residual,
    })
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

fn orient(v: &mut [f64]) {
    let k = (0..v.len()).fold(0, |k, i| if v[i].abs() > v[k].abs() { i } else { k });
    if v[k] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Labels `1..=4` by rank of `scores`; group sizes differ by at most one.
pub fn quartile_groups(scores: &[f64]) -> Vec<usize> {
    let n = scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    let mut labels = vec![0; n];
    for (rank, &i) in order.iter().enumerate() {
        labels[i] = rank * 4 / n + 1;
    }
    labels
}

/// Test-set quartile groups along the training PC1.
pub fn pc1_groups(train: &Matrix, test: &Matrix, seed: u64) -> Result<(Vec<usize>, Pc1)> {
    let pc = Pc1::fit(train, seed)?;
    let scores = pc.project(test)?;
    Ok((quartile_groups(&scores), pc))
}

/// Largest gap between the empirical CDF of `sample` and `cdf`.
pub fn ks_statistic<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> f64 {
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter().enumerate().fold(0.0, |d, (i, &x)| {
        let f = cdf(x);
        d.max(f - i as f64 / n).max((i + 1) as f64 / n - f)
    })
}

/// Asymptotic p-value of the one-sample KS statistic `d` at sample size `n`,
/// with Stephens' small-sample adjustment.
pub fn ks_pvalue(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut p = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        p += if k % 2 == 1 { 2.0 * term } else { -2.0 * term };
        if term < 1e-16 {
            break;
        }
    }
    p.clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(lo: f64, hi: f64) -> Interval {
        Interval { lo, hi }
    }

    #[test]
    fn four_case_fixture() {
        let ivs = [iv(0.0, 1.0), iv(0.0, 1.0), iv(0.0, 1.0), iv(0.0, 1.0)];
        let m = coverage_and_width(&ivs, &[0.0, 0.5, 1.5, -0.1]).unwrap();
        assert_eq!(m.coverage, 0.5);
        assert_eq!((m.mean_width, m.width_sd), (1.0, 0.0));
        assert!(coverage_and_width(&ivs, &[0.0]).is_err());
    }

    #[test]
    fn bins_are_left_open_except_the_first() {
        let s = BinSpec::unit_fifths();
        assert_eq!(s.assign(0.0), Some(0));
        assert_eq!(s.assign(0.2), Some(0));
        assert_eq!(s.assign(0.2000001), Some(1));
        assert_eq!(s.assign(1.0), Some(4));
        assert_eq!(s.assign(1.1), None);
        assert_eq!(s.label(4), "(0.8, 1]");
    }

    #[test]
    fn empty_bins_are_missing_and_counts_add_up() {
        let by = [0.1, 0.15, 0.9];
        let ivs = [iv(0.0, 1.0); 3];
        let t = binned_metrics(&by, &ivs, &[0.5, 2.0, 0.5], &BinSpec::unit_fifths()).unwrap();
        assert_eq!(t[0].count, 2);
        assert_eq!(t[0].metrics.unwrap().coverage, 0.5);
        assert!(t[1].metrics.is_none());
        assert_eq!(t.iter().map(|s| s.count).sum::<usize>(), 3);
    }

    #[test]
    fn smoothing_constants_and_symmetric_pairs() {
        let xs = [0.0, 0.3, 0.9, 1.0];
        let c = smooth_conditional(&xs, &[2.0; 4], &[0.0, 0.5, 2.0]).unwrap();
        assert!(c.values.iter().all(|v| (v - 2.0).abs() < 1e-15));
        let c = smooth_conditional(&[0.0, 1.0], &[3.0, 5.0], &[0.5]).unwrap();
        assert!((c.values[0] - 4.0).abs() < 1e-15);
        assert!(smooth_conditional(&[1.0, 1.0], &[0.0, 1.0], &[1.0]).is_err());
    }

    #[test]
    fn far_grid_points_widen_the_kernel() {
        let c = smooth_with_bandwidth(&[0.0, 1.0], &[0.0, 1.0], &[1e4], Some(1e-3)).unwrap();
        assert!(c.widened[0]);
        assert!(c.values[0] > 0.5 && c.values[0] <= 1.0);
    }

    #[test]
    fn quartiles_differ_by_at_most_one() {
        for n in [4, 5, 7, 10, 101] {
            let scores: Vec<f64> = (0..n).map(|i| ((i * 37) % n) as f64).collect();
            let g = quartile_groups(&scores);
            let sizes: Vec<usize> = (1..=4).map(|k| g.iter().filter(|&&v| v == k).count()).collect();
            assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1, "{sizes:?}");
        }
    }

    #[test]
    fn diagonal_data_has_a_diagonal_pc1() {
        let rows: Vec<[f64; 2]> = (0..200)
            .map(|i| {
                let t = i as f64 / 10.0;
                [t + 0.01 * (i % 3) as f64, t - 0.01 * (i % 5) as f64]
            })
            .collect();
        let pc = Pc1::fit(&Matrix::from_rows(&rows).unwrap(), 1).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((pc.direction[0] - s).abs() < 1e-3 && (pc.direction[1] - s).abs() < 1e-3);
    }

    #[test]
    fn constant_columns_are_dropped() {
        let rows: Vec<[f64; 3]> = (0..20).map(|i| [i as f64, 5.0, (i * i) as f64]).collect();
        let pc = Pc1::fit(&Matrix::from_rows(&rows).unwrap(), 0).unwrap();
        assert_eq!(pc.kept, vec![0, 2]);
    }

    #[test]
    fn ks_on_a_perfect_grid() {
        let s: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        let d = ks_statistic(&s, |x| x);
        assert!((d - 0.005).abs() < 1e-12);
        assert!(ks_pvalue(d, 100) > 0.99);
        assert!(ks_pvalue(0.3, 100) < 1e-6);
        // 1% critical value ≈ 1.628 / √n for large n
        assert!((ks_pvalue(1.628 / 100.0, 10_000) - 0.01).abs() < 1e-3);
    }
}
