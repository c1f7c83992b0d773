//! Special functions and quadrature used by the analytic CDFs.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

use statrs::function::{beta::beta_reg, erf::erfc_inv};

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

pub fn normal_quantile(u: f64) -> f64 {
    if u <= 0.0 {
        f64::NEG_INFINITY
    } else if u >= 1.0 {
        f64::INFINITY
    } else {
        let x = -SQRT_2 * erfc_inv(2.0 * u);
        // one Newton step polishes the last few bits
        let pdf = (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
        if pdf > 0.0 {
            x - (normal_cdf(x) - u) / pdf
        } else {
            x
        }
    }
}

/// Student-t CDF through the regularized incomplete beta function.
pub fn student_t_cdf(t: f64, dof: f64) -> f64 {
    if t.is_infinite() {
        return if t > 0.0 { 1.0 } else { 0.0 };
    }
    let tail = 0.5 * beta_reg(0.5 * dof, 0.5, dof / (dof + t * t));
    if t < 0.0 {
        tail
    } else {
        1.0 - tail
    }
}

/// Scaled complementary error function `exp(x²)·erfc(x)`, for `x >= 0`.
pub fn erfcx(x: f64) -> f64 {
    if x < 26.0 {
        (x * x).exp() * libm::erfc(x)
    } else {
        let inv2 = 1.0 / (x * x);
        (1.0 - 0.5 * inv2 + 0.75 * inv2 * inv2 - 1.875 * inv2 * inv2 * inv2) / (x * PI.sqrt())
    }
}

/// CDF of `sd·Z + scale·(E − 1)` with `Z ~ N(0,1)`, `E ~ Exp(1)` independent
/// (exponentially modified Gaussian).
pub fn emg_cdf(x: f64, sd: f64, scale: f64) -> f64 {
    let mu = -scale;
    let lambda = 1.0 / scale;
    let s = (x - mu) / sd;
    let w = s - lambda * sd;
    let tail = if w >= 0.0 {
        (0.5 * (w - s) * (w + s)).exp() * normal_cdf(w)
    } else {
        0.5 * (-0.5 * s * s).exp() * erfcx(-w * FRAC_1_SQRT_2)
    };
    (normal_cdf(s) - tail).clamp(0.0, 1.0)
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for the odd-indexed Kronrod nodes (and the centre).
const G_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * GK_WEIGHTS[7];
    let mut gauss = fc * G_WEIGHTS[3];
    for i in 0..7 {
        let dx = h * GK_NODES[i];
        let s = f(c - dx) + f(c + dx);
        kronrod += GK_WEIGHTS[i] * s;
        if i % 2 == 1 {
            gauss += G_WEIGHTS[i / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Adaptive Gauss–Kronrod (7/15) quadrature on a finite interval.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    let mut total = 0.0;
    let mut stack = vec![(a, b, tol, 0u32)];
    while let Some((lo, hi, eps, depth)) = stack.pop() {
        let (val, err) = gk15(&f, lo, hi);
        if err <= eps || depth >= 40 {
            total += val;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid, 0.5 * eps, depth + 1));
            stack.push((mid, hi, 0.5 * eps, depth + 1));
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Closed form of the t₃ CDF.
    fn t3_closed_form(t: f64) -> f64 {
        let r = t / 3f64.sqrt();
        0.5 + (r.atan() + r / (1.0 + r * r)) / PI
    }

    #[test]
    fn student_t3_matches_closed_form() {
        for i in -60..=60 {
            let t = i as f64 * 0.25;
            assert!((student_t_cdf(t, 3.0) - t3_closed_form(t)).abs() < 1e-12, "t = {t}");
        }
    }

    #[test]
    fn normal_round_trip() {
        for i in 1..100 {
            let u = i as f64 / 100.0;
            assert!((normal_cdf(normal_quantile(u)) - u).abs() < 1e-13);
        }
        assert!((normal_cdf(1.959_963_984_540_054) - 0.975).abs() < 1e-13);
    }

    #[test]
    fn erfcx_is_continuous_across_the_switch() {
        let a = erfcx(25.999_999);
        let b = erfcx(26.000_001);
        assert!((a - b).abs() / a < 1e-6);
    }

    #[test]
    fn emg_matches_numerical_convolution() {
        for &(sd, scale) in &[(1.0, 1.0), (0.3, 0.05), (0.05, 0.4), (0.01, 1.0)] {
            for &x in &[-1.0, -0.3, 0.0, 0.2, 1.5] {
                // P(sd Z + scale(E-1) <= x) = ∫ e^{-e} Φ((x + scale - scale e)/sd) de
                let f = |e: f64| (-e).exp() * normal_cdf((x + scale - scale * e) / sd);
                let kink = ((x + scale) / scale).clamp(0.0, 60.0);
                let mut cuts = vec![0.0, 1.0, 60.0];
                for d in [-0.3, -0.03, 0.0, 0.03, 0.3] {
                    cuts.push((kink + d).clamp(0.0, 60.0));
                }
                cuts.sort_by(f64::total_cmp);
                let direct: f64 = cuts.windows(2).map(|w| integrate(f, w[0], w[1], 1e-14)).sum();
                let got = emg_cdf(x, sd, scale);
                assert!((got - direct).abs() < 1e-9, "sd {sd} scale {scale} x {x}: {got} vs {direct}");
            }
        }
    }

    #[test]
    fn quadrature_integrates_polynomials_and_gaussians() {
        assert!((integrate(|x| x * x * x, 0.0, 2.0, 1e-13) - 4.0).abs() < 1e-12);
        let g = integrate(|x| (-0.5 * x * x).exp(), -12.0, 12.0, 1e-13);
        assert!((g - (2.0 * PI).sqrt()).abs() < 1e-11);
    }
}
