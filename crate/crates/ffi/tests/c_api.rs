use std::ffi::CStr;
use std::ptr;

use cpi_core::synth::sample_dgp;
use cpi_ffi::*;

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(cpi_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn rank_indices_match_the_closed_form() {
    let (mut l, mut h) = (0usize, 0usize);
    let st = unsafe { cpi_rank_indices(200, 0.1, 0.05, &mut l, &mut h) };
    assert_eq!(st, CpiStatus::Ok);
    assert_eq!((l, h), (11, 191));
    assert!(cpi_last_error_message().is_null());
}

#[test]
fn invalid_alpha_sets_status_and_message() {
    let (mut l, mut h) = (0usize, 0usize);
    let st = unsafe { cpi_rank_indices(200, 1.5, 0.05, &mut l, &mut h) };
    assert_eq!(st, CpiStatus::InvalidArgument);
    assert!(last_error().unwrap().contains("alpha"));
}

#[test]
fn null_out_pointer_is_reported() {
    let mut l = 0usize;
    let st = unsafe { cpi_rank_indices(10, 0.1, 0.05, &mut l, ptr::null_mut()) };
    assert_eq!(st, CpiStatus::NullPointer);
    assert!(last_error().unwrap().contains("out_upper"));
}

#[test]
fn calibration_handle_round_trip() {
    let pits: Vec<f64> = (1..=99).map(|i| i as f64 / 100.0).collect();
    let mut state = ptr::null_mut();
    unsafe {
        assert_eq!(cpi_calibration_from_pits(pits.as_ptr(), pits.len(), 3, &mut state), CpiStatus::Ok);
        assert_eq!(cpi_calibration_len(state), 99);
        let (mut lo, mut hi) = (0.0, 0.0);
        assert_eq!(
            cpi_calibration_cutoffs(state, CpiMethod::Cpi, 0.1, 0.05, &mut lo, &mut hi),
            CpiStatus::Ok
        );
        // L = 6, H = 95 for n = 99
        assert_eq!((lo, hi), (0.06, 0.95));
        assert_eq!(
            cpi_calibration_cutoffs(state, CpiMethod::Dcp, 0.1, 0.05, &mut lo, &mut hi),
            CpiStatus::Ok
        );
        assert!(lo < 0.5 && hi > 0.5);
        cpi_calibration_free(state);
        cpi_calibration_free(ptr::null_mut());
        assert_eq!(cpi_calibration_len(ptr::null()), 0);
    }
}

#[test]
fn pits_outside_unit_interval_are_rejected() {
    let pits = [0.2, 1.3];
    let mut state = ptr::null_mut();
    let st = unsafe { cpi_calibration_from_pits(pits.as_ptr(), 2, 0, &mut state) };
    assert_ne!(st, CpiStatus::Ok);
    assert!(state.is_null());
}

#[test]
fn fit_calibrate_predict_through_handles() {
    let train = sample_dgp(600, 0.0, 1).unwrap();
    let cal = sample_dgp(200, 0.0, 2).unwrap();
    let test = sample_dgp(50, 0.0, 3).unwrap();
    let d = train.dim();
    unsafe {
        let mut model = ptr::null_mut();
        let st = cpi_hazard_fit(
            train.features.data().as_ptr(),
            train.responses.as_ptr(),
            train.len(),
            d,
            20,
            7,
            5,
            &mut model,
        );
        assert_eq!(st, CpiStatus::Ok, "{:?}", last_error());

        let (mut f, mut q) = (0.0, 0.0);
        assert_eq!(cpi_hazard_quantile(model, test.x(0).as_ptr(), d, 0.3, &mut q), CpiStatus::Ok);
        assert_eq!(cpi_hazard_cdf(model, test.x(0).as_ptr(), d, q, &mut f), CpiStatus::Ok);
        assert!((f - 0.3).abs() < 0.2);
        assert_eq!(
            cpi_hazard_cdf(model, test.x(0).as_ptr(), d - 1, q, &mut f),
            CpiStatus::DimensionMismatch
        );
        assert_eq!(
            cpi_hazard_quantile(model, test.x(0).as_ptr(), d, 1.5, &mut q),
            CpiStatus::InvalidArgument
        );

        for (method, z) in [(CpiMethod::Cpi, 0.05), (CpiMethod::Dcp, -1.0)] {
            let mut pred = ptr::null_mut();
            assert_eq!(cpi_predictor_new(model, method, 0.1, z, 11, &mut pred), CpiStatus::Ok);
            let n = test.len();
            let (mut lo, mut hi) = (vec![0.0; n], vec![0.0; n]);
            let x = test.features.data().as_ptr();
            assert_eq!(
                cpi_predictor_predict(pred, x, n, d, lo.as_mut_ptr(), hi.as_mut_ptr()),
                CpiStatus::NotCalibrated
            );
            let st = cpi_predictor_calibrate(pred, cal.features.data().as_ptr(), cal.responses.as_ptr(), cal.len(), d);
            assert_eq!(st, CpiStatus::Ok);
            assert_eq!(
                cpi_predictor_predict(pred, x, n, d, lo.as_mut_ptr(), hi.as_mut_ptr()),
                CpiStatus::Ok
            );
            assert!(lo.iter().zip(&hi).all(|(a, b)| a <= b));
            cpi_predictor_free(pred);
        }
        cpi_hazard_free(model);
    }
}

#[test]
fn predictor_outlives_its_model_handle() {
    let train = sample_dgp(300, 0.0, 4).unwrap();
    let d = train.dim();
    unsafe {
        let mut model = ptr::null_mut();
        let st = cpi_hazard_fit(
            train.features.data().as_ptr(),
            train.responses.as_ptr(),
            train.len(),
            d,
            10,
            1,
            3,
            &mut model,
        );
        assert_eq!(st, CpiStatus::Ok);
        let mut pred = ptr::null_mut();
        assert_eq!(cpi_predictor_new(model, CpiMethod::Cpi, 0.1, 0.05, 0, &mut pred), CpiStatus::Ok);
        cpi_hazard_free(model);
        let st = cpi_predictor_calibrate(pred, train.features.data().as_ptr(), train.responses.as_ptr(), 100, d);
        assert_eq!(st, CpiStatus::Ok);
        cpi_predictor_free(pred);
    }
}

#[test]
fn header_declares_every_export() {
    let header = include_str!("../include/cpi.h");
    for name in [
        "cpi_version",
        "cpi_last_error_message",
        "cpi_rank_indices",
        "cpi_calibration_from_pits",
        "cpi_calibration_free",
        "cpi_calibration_len",
        "cpi_calibration_cutoffs",
        "cpi_hazard_fit",
        "cpi_hazard_free",
        "cpi_hazard_cdf",
        "cpi_hazard_quantile",
        "cpi_predictor_new",
        "cpi_predictor_free",
        "cpi_predictor_calibrate",
        "cpi_predictor_predict",
        "CPI_STATUS_NOT_CALIBRATED",
        "typedef struct CpiPredictor CpiPredictor",
    ] {
        assert!(header.contains(name), "{name} missing from cpi.h");
    }
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/cpi.h");
    match std::process::Command::new("cc").args(["-fsyntax-only", "-x", "c", header]).output() {
        Ok(out) => assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr)),
        Err(_) => eprintln!("no C compiler on PATH; header syntax not checked"),
    }
}
