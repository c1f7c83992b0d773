use cpi_core::baselines::{fit_cqr, fit_rescaled, fit_residual, CqrPredictor};
use cpi_core::conformal::IntervalPredictor;
use cpi_core::rng::derive_seed;
use cpi_core::synth::sample_dgp;
use cpi_core::tensor_nn::{MlpConfig, TrainConfig};
use proptest::prelude::*;

const ALPHA: f64 = 0.1;

fn mlp(out: usize) -> MlpConfig {
    MlpConfig::new(5, vec![16, 16], out, 1)
}

fn quick() -> TrainConfig {
    TrainConfig::baseline_default(1).capped(Some(25))
}

fn predictors() -> Vec<Box<dyn IntervalPredictor>> {
    let train = sample_dgp(800, 0.0, 1).unwrap();
    vec![
        Box::new(fit_residual(&train, &mlp(1), &quick(), ALPHA).unwrap().0),
        Box::new(fit_rescaled(&train, &mlp(2), &quick(), ALPHA).unwrap().0),
        Box::new(fit_cqr(&train, &mlp(2), &quick(), ALPHA).unwrap().0),
    ]
}

#[test]
fn baselines_keep_marginal_coverage_on_exchangeable_draws() {
    const REPS: u64 = 10_000;
    const N_TEST: usize = 20;
    let floor = (1.0 - ALPHA) - 3.0 * (ALPHA * (1.0 - ALPHA) / REPS as f64).sqrt();
    for mut p in predictors() {
        let mut covered = 0usize;
        for r in 0..REPS {
            let cal = sample_dgp(200, 0.0, derive_seed(7, "baseline/cal", r)).unwrap();
            let test = sample_dgp(N_TEST, 0.0, derive_seed(7, "baseline/test", r)).unwrap();
            p.calibrate(&cal).unwrap();
            let iv = p.predict_many(&test.features).unwrap();
            covered += iv.iter().zip(&test.responses).filter(|(i, y)| i.contains(**y)).count();
        }
        let cov = covered as f64 / (REPS as usize * N_TEST) as f64;
        assert!(cov >= floor, "{}: coverage {cov} below {floor}", p.method());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn residual_width_is_identical_everywhere(seed in any::<u64>()) {
        let train = sample_dgp(300, 0.0, seed).unwrap();
        let (mut p, _) = fit_residual(&train, &mlp(1), &TrainConfig::baseline_default(seed).capped(Some(5)), ALPHA).unwrap();
        p.calibrate(&sample_dgp(100, 0.0, seed ^ 1).unwrap()).unwrap();
        let iv = p.predict_many(&sample_dgp(200, 0.0, seed ^ 2).unwrap().features).unwrap();
        let w = iv[0].width();
        prop_assert!(iv.iter().all(|i| i.width() == w));
    }

    #[test]
    fn cqr_contains_its_band(seed in any::<u64>()) {
        let train = sample_dgp(300, 0.0, seed).unwrap();
        let (mut p, _): (CqrPredictor, _) =
            fit_cqr(&train, &mlp(2), &TrainConfig::baseline_default(seed).capped(Some(5)), ALPHA).unwrap();
        p.calibrate(&sample_dgp(100, 0.0, seed ^ 1).unwrap()).unwrap();
        let x = sample_dgp(200, 0.0, seed ^ 2).unwrap().features;
        let band = p.band(&x).unwrap();
        let iv = p.predict_many(&x).unwrap();
        // the conformal correction is shared, so a nonnegative one shows as
        // an interval at least as wide as its band
        for (i, (lo, hi)) in iv.iter().zip(&band) {
            let (a, b) = (lo.min(*hi), lo.max(*hi));
            if i.width() >= b - a {
                prop_assert!(i.lo <= a + 1e-9 && i.hi >= b - 1e-9, "{i:?} vs ({a}, {b})");
            }
        }
    }
}
