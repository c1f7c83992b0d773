//! Checks shared by the property tests and the acceptance suite.
#![allow(dead_code)]

use cpi_core::cdf::{fit_hazard_cdf, oracle_cdf_components, CdfModel, HazardCdf};
use cpi_core::conformal::{cpi_cutoffs, rank_indices, CalibrationState};
use cpi_core::eval::power_iteration;
use cpi_core::rng::rng_from_seed;
use cpi_core::synth::sample_dgp;
use cpi_core::tensor_nn::{loss_and_grad, loss_value, LossKind, Matrix, Mlp, MlpConfig, TrainConfig};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;

pub const FD_STEP: f64 = 1e-5;
/// Gradients smaller than this are compared in absolute terms.
pub const FD_FLOOR: f64 = 1e-3;

/// One representative of every loss, with the output width it needs.
pub fn all_losses() -> Vec<(LossKind, usize)> {
    vec![
        (LossKind::Mse, 2),
        (LossKind::GaussianNll, 2),
        (LossKind::Pinball { levels: vec![0.05, 0.5, 0.95] }, 3),
        (LossKind::HazardBce, 6),
        (LossKind::ScaledSigmoidMse { scale: 0.1 }, 1),
    ]
}

fn targets_for(loss: &LossKind, outputs: usize, rows: usize, rng: &mut impl Rng) -> Matrix {
    match loss {
        LossKind::Mse => {
            let d: Vec<f64> = (0..rows * outputs).map(|_| rng.random_range(-1.0..1.0)).collect();
            Matrix::from_vec(rows, outputs, d).unwrap()
        }
        LossKind::HazardBce => {
            let d: Vec<f64> = (0..rows).map(|_| rng.random_range(0..outputs) as f64).collect();
            Matrix::column_vector(&d)
        }
        LossKind::ScaledSigmoidMse { scale } => {
            let d: Vec<f64> = (0..rows).map(|_| rng.random_range(0.0..*scale)).collect();
            Matrix::column_vector(&d)
        }
        _ => {
            let d: Vec<f64> = (0..rows).map(|_| rng.random_range(-2.0..2.0)).collect();
            Matrix::column_vector(&d)
        }
    }
}

/// Largest relative gap between back-propagated and central-difference
/// gradients over every parameter of a small random network.
pub fn fd_gradient_error(loss: &LossKind, outputs: usize, seed: u64) -> f64 {
    let mut rng = rng_from_seed(seed);
    let inputs = rng.random_range(1..5);
    let hidden: Vec<usize> = (0..rng.random_range(1..3)).map(|_| rng.random_range(2..7)).collect();
    let rows = rng.random_range(1..9);
    let mut net = Mlp::new(MlpConfig::new(inputs, hidden, outputs, seed)).unwrap();
    // nonzero biases so that hidden units are not all on the same side of the kink
    for layer in net.layers_mut() {
        for b in layer.bias.iter_mut() {
            *b = rng.random_range(-0.5..0.5);
        }
    }
    let x = Matrix::from_vec(rows, inputs, (0..rows * inputs).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap();
    let y = targets_for(loss, outputs, rows, &mut rng);
    let (_, grads) = loss_and_grad(&net, &x, &y, loss).unwrap();

    let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(FD_FLOOR);
    let mut worst = 0.0f64;
    for l in 0..net.layers().len() {
        let nw = net.layers()[l].weights.data().len();
        for k in 0..nw + net.layers()[l].bias.len() {
            let orig = *param(&mut net, l, k);
            *param(&mut net, l, k) = orig + FD_STEP;
            let up = loss_value(&net, &x, &y, loss).unwrap();
            *param(&mut net, l, k) = orig - FD_STEP;
            let down = loss_value(&net, &x, &y, loss).unwrap();
            *param(&mut net, l, k) = orig;
            let numeric = (up - down) / (2.0 * FD_STEP);
            let analytic = if k < nw {
                grads.layers[l].weights.data()[k]
            } else {
                grads.layers[l].bias[k - nw]
            };
            worst = worst.max(rel(analytic, numeric));
        }
    }
    worst
}

/// Weights of layer `l` first, then its biases.
fn param(net: &mut Mlp, l: usize, k: usize) -> &mut f64 {
    let layer = &mut net.layers_mut()[l];
    let nw = layer.weights.data().len();
    if k < nw {
        &mut layer.weights.data_mut()[k]
    } else {
        &mut layer.bias[k - nw]
    }
}

/// A quickly trained hazard model on simulated data.
pub fn small_hazard_model(seed: u64) -> HazardCdf {
    let data = sample_dgp(800, 0.0, seed).unwrap();
    let mlp = MlpConfig::new(data.dim(), vec![32, 32], 100, seed);
    let train = TrainConfig::density_default(seed).capped(Some(40));
    fit_hazard_cdf(&data, &mlp, &train, 100).unwrap().0
}

pub fn test_covariates(n: usize, seed: u64) -> Matrix {
    sample_dgp(n, 0.0, seed).unwrap().features
}

/// Worst `|F(Q(u)) − u| / tolerance` over `u ∈ {0.01, …, 0.99}` and every row
/// of `x`; at most 1 means every round trip is inside its tolerance.
pub fn round_trip_ratio(model: &dyn CdfModel, x: &Matrix) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..x.rows() {
        let cond = model.conditional(x.row(i)).unwrap();
        let tol = cond.inversion_tolerance();
        for k in 1..=99 {
            let u = k as f64 / 100.0;
            let err = (cond.cdf(cond.quantile(u)) - u).abs();
            worst = worst.max(err / tol);
        }
    }
    worst
}

/// Order-statistic selection written out by counting, not by sorting.
pub fn brute_force_order_statistic(pits: &[f64], k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    if k > pits.len() {
        return 1.0;
    }
    *pits
        .iter()
        .find(|&&v| {
            let below = pits.iter().filter(|&&p| p < v).count();
            let at_most = pits.iter().filter(|&&p| p <= v).count();
            below < k && k <= at_most
        })
        .unwrap()
}

/// Ranks by scanning integers, with the same 1e-9 integer tolerance.
pub fn brute_force_ranks(n: usize, alpha: f64, z: f64) -> (usize, usize) {
    let m = (n + 1) as f64;
    let lo_edge = z * m;
    let hi_edge = (z + 1.0 - alpha) * m;
    let tol = |v: f64| 1e-9 * v.abs().max(1.0);
    let lower = (1..=n + 2).take_while(|&k| k as f64 <= lo_edge + tol(lo_edge)).count() + 1;
    let upper = (1..).find(|&k| k as f64 >= hi_edge - tol(hi_edge)).unwrap();
    (lower, upper.max(lower))
}

/// A random calibration instance; about a third of them carry heavy ties.
pub fn random_cutoff_instance(seed: u64) -> (Vec<f64>, f64, f64) {
    let mut rng = rng_from_seed(seed);
    let n = rng.random_range(1..400);
    let tied = rng.random_bool(0.3);
    let pits: Vec<f64> = (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            if tied {
                (u * 10.0).floor() / 10.0
            } else {
                u
            }
        })
        .collect();
    let alpha = rng.random_range(0.01..0.5);
    let z = alpha * rng.random::<f64>();
    (pits, alpha, z)
}

/// Number of instances out of `count` where `cpi_cutoffs` disagrees with the
/// counting oracle.
pub fn cutoff_mismatches(count: u64, seed: u64) -> usize {
    (0..count)
        .filter(|&i| {
            let (pits, alpha, z) = random_cutoff_instance(seed.wrapping_add(i));
            let state = CalibrationState::from_pits(pits.clone(), i).unwrap();
            let got = cpi_cutoffs(&state, alpha, z).unwrap();
            let (l, h) = brute_force_ranks(pits.len(), alpha, z);
            let want = (brute_force_order_statistic(&pits, l), brute_force_order_statistic(&pits, h));
            (got.lower_rank, got.upper_rank) != (l, h) || (got.u_lo, got.u_hi) != want
        })
        .count()
}

/// Number of `(n, α, z)` draws violating `H − L + 1 ≥ (1−α)(n+1)`.
pub fn coverage_mass_violations(count: u64, seed: u64) -> usize {
    let mut rng = rng_from_seed(seed);
    (0..count)
        .filter(|_| {
            let n = rng.random_range(1..5000);
            let alpha = rng.random_range(0.001..0.999);
            let z = match rng.random_range(0..4) {
                0 => 0.0,
                1 => alpha,
                _ => alpha * rng.random::<f64>(),
            };
            let r = rank_indices(n, alpha, z).unwrap();
            let mass = (r.upper - r.lower + 1) as f64;
            mass < (1.0 - alpha) * (n + 1) as f64 - 1e-9
        })
        .count()
}

/// `|cos|` between the power-iteration and the dense-eigensolver leading
/// eigenvectors of a random 5 × 5 sample covariance.
pub fn pc1_cosine(seed: u64) -> f64 {
    let mut rng = rng_from_seed(seed);
    let d = 5;
    let rows = 40;
    let scales: Vec<f64> = (0..d).map(|_| rng.random_range(0.2..3.0)).collect();
    let mix = DMatrix::<f64>::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    let raw = DMatrix::<f64>::from_fn(rows, d, |_, j| scales[j] * (rng.random::<f64>() - 0.5));
    let data = raw * mix;
    let mean = data.row_mean();
    let centred = DMatrix::from_fn(rows, d, |i, j| data[(i, j)] - mean[j]);
    let cov = centred.transpose() * &centred / rows as f64;
    let flat: Vec<f64> = (0..d * d).map(|k| cov[(k / d, k % d)]).collect();
    let (v, _, _) = power_iteration(&flat, d, seed).unwrap();
    let eig = SymmetricEigen::new(cov);
    let top = eig.eigenvalues.imax();
    let w = eig.eigenvectors.column(top);
    v.iter().zip(w.iter()).map(|(a, b)| a * b).sum::<f64>().abs()
}

/// Worst deviation of the mixture weights from the simplex on a 1001-point
/// `x₁` sweep.
pub fn simplex_violation() -> f64 {
    (0..=1000)
        .map(|i| {
            let pi = oracle_cdf_components(i as f64 / 1000.0).pi;
            let sum_err = (pi.iter().sum::<f64>() - 1.0).abs();
            let neg = pi.iter().fold(0.0f64, |a, &p| a.max(-p));
            sum_err.max(neg)
        })
        .fold(0.0, f64::max)
}
