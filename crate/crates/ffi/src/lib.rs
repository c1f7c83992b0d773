//! C interface to `cpi-core`.
//!
//! Every fallible function returns a [`CpiStatus`]; on failure a message is
//! kept per thread and can be read with [`cpi_last_error_message`]. Objects
//! are handed out as opaque pointers and released with their `*_free`
//! function. Matrices are row-major `f64` arrays.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;
use std::sync::Arc;

use cpi_core::cdf::{fit_hazard_cdf, CdfModel, HazardCdf, DEFAULT_BINS};
use cpi_core::conformal::{
    cpi_cutoffs, dcp_cutoffs, rank_indices, CalibrationState, IntervalPredictor, PitMethod, PitPredictor, ZStrategy,
    DEFAULT_GRID_POINTS,
};
use cpi_core::datapipe::Dataset;
use cpi_core::tensor_nn::{Matrix, MlpConfig, TrainConfig};
use cpi_core::Error;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CpiStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    EmptyData = 4,
    Degenerate = 5,
    NotCalibrated = 6,
    Numerical = 7,
    Io = 8,
    Panic = 9,
}

/// Interval method for [`cpi_predictor_new`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CpiMethod {
    Cpi = 0,
    Dcp = 1,
}

/// Sorted calibration PITs.
pub struct CpiCalibration(CalibrationState);

/// A fitted discrete-hazard conditional CDF.
pub struct CpiHazardModel(Arc<HazardCdf>);

/// A CPI or DCP predictor bound to a hazard model.
pub struct CpiPredictor(PitPredictor);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> CpiStatus {
    match e {
        Error::DimensionMismatch { .. } => CpiStatus::DimensionMismatch,
        Error::InvalidConfig { field: "predictor", .. } => CpiStatus::NotCalibrated,
        Error::InvalidConfig { .. } | Error::OutOfRange { .. } => CpiStatus::InvalidArgument,
        Error::EmptyData(_) => CpiStatus::EmptyData,
        Error::Degenerate(_) => CpiStatus::Degenerate,
        Error::NonFiniteLoss { .. } | Error::InvertedInterval { .. } | Error::NoConvergence { .. } => {
            CpiStatus::Numerical
        }
        Error::Io(_) | Error::Csv(_) | Error::Json(_) | Error::Parse { .. } | Error::Snapshot(_) => CpiStatus::Io,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (CpiStatus, String)>) -> CpiStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            CpiStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            CpiStatus::Panic
        }
    }
}

fn lift<T>(r: cpi_core::Result<T>) -> Result<T, (CpiStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(name: &str) -> (CpiStatus, String) {
    (CpiStatus::NullPointer, format!("{name} is NULL"))
}

unsafe fn view<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], (CpiStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn view_mut<'a, T>(p: *mut T, len: usize, name: &str) -> Result<&'a mut [T], (CpiStatus, String)> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

unsafe fn matrix(x: *const f64, rows: usize, cols: usize) -> Result<Matrix, (CpiStatus, String)> {
    let len = rows
        .checked_mul(cols)
        .ok_or((CpiStatus::InvalidArgument, "rows * cols overflows".to_string()))?;
    lift(Matrix::from_vec(rows, cols, view(x, len, "x")?.to_vec()))
}

unsafe fn out<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, (CpiStatus, String)> {
    p.as_mut().ok_or_else(|| null(name))
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cpi_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next call into the library from this thread.
#[no_mangle]
pub extern "C" fn cpi_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// CPI rank indices `L`, `H` for `n` calibration points.
///
/// # Safety
/// `out_lower` and `out_upper` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cpi_rank_indices(
    n: usize,
    alpha: f64,
    z: f64,
    out_lower: *mut usize,
    out_upper: *mut usize,
) -> CpiStatus {
    guard(|| {
        let r = lift(rank_indices(n, alpha, z))?;
        *out(out_lower, "out_lower")? = r.lower;
        *out(out_upper, "out_upper")? = r.upper;
        Ok(())
    })
}

/// Builds a calibration state from `n` PIT values in `[0, 1]`.
///
/// # Safety
/// `pits` must point to `n` readable doubles; `out_state` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cpi_calibration_from_pits(
    pits: *const f64,
    n: usize,
    tie_seed: u64,
    out_state: *mut *mut CpiCalibration,
) -> CpiStatus {
    guard(|| {
        let slot = out(out_state, "out_state")?;
        let state = lift(CalibrationState::from_pits(view(pits, n, "pits")?.to_vec(), tie_seed))?;
        *slot = Box::into_raw(Box::new(CpiCalibration(state)));
        Ok(())
    })
}

/// # Safety
/// `state` must be NULL or a pointer returned by [`cpi_calibration_from_pits`]
/// that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn cpi_calibration_free(state: *mut CpiCalibration) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

/// Number of calibration points, 0 for NULL.
///
/// # Safety
/// `state` must be NULL or a live calibration handle.
#[no_mangle]
pub unsafe extern "C" fn cpi_calibration_len(state: *const CpiCalibration) -> usize {
    state.as_ref().map_or(0, |s| s.0.n())
}

/// PIT cutoffs `(u_lo, u_hi)` for CPI or DCP at starting point `z`.
///
/// # Safety
/// `state` must be a live calibration handle; the out pointers must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cpi_calibration_cutoffs(
    state: *const CpiCalibration,
    method: CpiMethod,
    alpha: f64,
    z: f64,
    out_lo: *mut f64,
    out_hi: *mut f64,
) -> CpiStatus {
    guard(|| {
        let s = &state.as_ref().ok_or_else(|| null("state"))?.0;
        let c = lift(match method {
            CpiMethod::Cpi => cpi_cutoffs(s, alpha, z),
            CpiMethod::Dcp => dcp_cutoffs(s, alpha, z),
        })?;
        *out(out_lo, "out_lo")? = c.u_lo;
        *out(out_hi, "out_hi")? = c.u_hi;
        Ok(())
    })
}

/// Fits a hazard CDF on `rows × cols` features `x` and responses `y`.
/// `bins = 0` selects the default of 100; `max_epochs = 0` keeps the
/// default epoch budget.
///
/// # Safety
/// `x` must point to `rows * cols` doubles, `y` to `rows` doubles, and
/// `out_model` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cpi_hazard_fit(
    x: *const f64,
    y: *const f64,
    rows: usize,
    cols: usize,
    bins: usize,
    seed: u64,
    max_epochs: usize,
    out_model: *mut *mut CpiHazardModel,
) -> CpiStatus {
    guard(|| {
        let slot = out(out_model, "out_model")?;
        let features = matrix(x, rows, cols)?;
        let data = lift(Dataset::new(features, view(y, rows, "y")?.to_vec(), "ffi"))?;
        let mlp = MlpConfig::new(cols, vec![64, 64], 1, seed);
        let tc = TrainConfig::density_default(seed).capped((max_epochs > 0).then_some(max_epochs));
        let bins = if bins == 0 { DEFAULT_BINS } else { bins };
        let (model, _) = lift(fit_hazard_cdf(&data, &mlp, &tc, bins))?;
        *slot = Box::into_raw(Box::new(CpiHazardModel(Arc::new(model))));
        Ok(())
    })
}

/// # Safety
/// `model` must be NULL or a live hazard handle. Predictors built from it
/// keep their own reference and stay usable.
#[no_mangle]
pub unsafe extern "C" fn cpi_hazard_free(model: *mut CpiHazardModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// `F(y | x)` for one feature row of length `cols`.
///
/// # Safety
/// `model` must be a live hazard handle, `x` must point to `cols` doubles
/// and `out_value` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cpi_hazard_cdf(
    model: *const CpiHazardModel,
    x: *const f64,
    cols: usize,
    y: f64,
    out_value: *mut f64,
) -> CpiStatus {
    guard(|| {
        let m = &model.as_ref().ok_or_else(|| null("model"))?.0;
        let c = lift(m.conditional(view(x, cols, "x")?))?;
        *out(out_value, "out_value")? = c.cdf(y);
        Ok(())
    })
}

/// `Q(u | x)` for one feature row of length `cols`, `u ∈ [0, 1]`.
///
/// # Safety
/// As for [`cpi_hazard_cdf`].
#[no_mangle]
pub unsafe extern "C" fn cpi_hazard_quantile(
    model: *const CpiHazardModel,
    x: *const f64,
    cols: usize,
    u: f64,
    out_value: *mut f64,
) -> CpiStatus {
    guard(|| {
        let m = &model.as_ref().ok_or_else(|| null("model"))?.0;
        if !(0.0..=1.0).contains(&u) {
            return Err((CpiStatus::InvalidArgument, format!("u = {u} outside [0, 1]")));
        }
        let c = lift(m.conditional(view(x, cols, "x")?))?;
        *out(out_value, "out_value")? = c.quantile(u);
        Ok(())
    })
}

/// Creates an uncalibrated predictor. A `z` in `[0, alpha]` fixes the
/// starting point; a negative `z` searches the default grid per test point.
///
/// # Safety
/// `model` must be a live hazard handle; `out_predictor` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cpi_predictor_new(
    model: *const CpiHazardModel,
    method: CpiMethod,
    alpha: f64,
    z: f64,
    tie_seed: u64,
    out_predictor: *mut *mut CpiPredictor,
) -> CpiStatus {
    guard(|| {
        let slot = out(out_predictor, "out_predictor")?;
        let m = model.as_ref().ok_or_else(|| null("model"))?.0.clone();
        let strategy = if z < 0.0 {
            ZStrategy::GridPerTest {
                grid_points: DEFAULT_GRID_POINTS,
            }
        } else {
            ZStrategy::Fixed(z)
        };
        let method = match method {
            CpiMethod::Cpi => PitMethod::Cpi,
            CpiMethod::Dcp => PitMethod::Dcp,
        };
        let p = lift(PitPredictor::new(m as Arc<dyn CdfModel>, method, strategy, alpha, tie_seed))?;
        *slot = Box::into_raw(Box::new(CpiPredictor(p)));
        Ok(())
    })
}

/// # Safety
/// `predictor` must be NULL or a live predictor handle.
#[no_mangle]
pub unsafe extern "C" fn cpi_predictor_free(predictor: *mut CpiPredictor) {
    if !predictor.is_null() {
        drop(Box::from_raw(predictor));
    }
}

/// Calibrates on `rows` held-out points, replacing any earlier calibration.
///
/// # Safety
/// `predictor` must be a live predictor handle; `x` must point to
/// `rows * cols` doubles and `y` to `rows` doubles.
#[no_mangle]
pub unsafe extern "C" fn cpi_predictor_calibrate(
    predictor: *mut CpiPredictor,
    x: *const f64,
    y: *const f64,
    rows: usize,
    cols: usize,
) -> CpiStatus {
    guard(|| {
        let p = &mut predictor.as_mut().ok_or_else(|| null("predictor"))?.0;
        let data = lift(Dataset::new(matrix(x, rows, cols)?, view(y, rows, "y")?.to_vec(), "ffi"))?;
        lift(p.calibrate(&data))
    })
}

/// Writes one interval per feature row into `out_lo[i]`, `out_hi[i]`.
///
/// # Safety
/// `predictor` must be a live predictor handle; `x` must point to
/// `rows * cols` doubles; `out_lo` and `out_hi` must each hold `rows` doubles.
#[no_mangle]
pub unsafe extern "C" fn cpi_predictor_predict(
    predictor: *const CpiPredictor,
    x: *const f64,
    rows: usize,
    cols: usize,
    out_lo: *mut f64,
    out_hi: *mut f64,
) -> CpiStatus {
    guard(|| {
        let p = &predictor.as_ref().ok_or_else(|| null("predictor"))?.0;
        let lo = view_mut(out_lo, rows, "out_lo")?;
        let hi = view_mut(out_hi, rows, "out_hi")?;
        let intervals = lift(p.predict_many(&matrix(x, rows, cols)?))?;
        for (i, iv) in intervals.iter().enumerate() {
            lo[i] = iv.lo;
            hi[i] = iv.hi;
        }
        Ok(())
    })
}

/// Reads the last error as an owned Rust string; used by the tests.
#[doc(hidden)]
pub fn last_error() -> Option<String> {
    let p = cpi_last_error_message();
    if p.is_null() {
        None
    } else {
        // SAFETY: the pointer comes from the thread-local CString.
        Some(unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned())
    }
}
