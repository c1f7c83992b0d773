#ifndef CPI_H
#define CPI_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes.
typedef enum CpiStatus {
  CPI_STATUS_OK = 0,
  CPI_STATUS_NULL_POINTER = 1,
  CPI_STATUS_INVALID_ARGUMENT = 2,
  CPI_STATUS_DIMENSION_MISMATCH = 3,
  CPI_STATUS_EMPTY_DATA = 4,
  CPI_STATUS_DEGENERATE = 5,
  CPI_STATUS_NOT_CALIBRATED = 6,
  CPI_STATUS_NUMERICAL = 7,
  CPI_STATUS_IO = 8,
  CPI_STATUS_PANIC = 9,
} CpiStatus;

// Interval method for [`cpi_predictor_new`].
typedef enum CpiMethod {
  CPI_METHOD_CPI = 0,
  CPI_METHOD_DCP = 1,
} CpiMethod;

// Sorted calibration PITs.
typedef struct CpiCalibration CpiCalibration;

// A fitted discrete-hazard conditional CDF.
typedef struct CpiHazardModel CpiHazardModel;

// A CPI or DCP predictor bound to a hazard model.
typedef struct CpiPredictor CpiPredictor;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version, a static NUL-terminated string.
const char *cpi_version(void);

// Message of the last failed call on this thread, or NULL. The pointer
// stays valid until the next call into the library from this thread.
const char *cpi_last_error_message(void);

// CPI rank indices `L`, `H` for `n` calibration points.
//
// # Safety
// `out_lower` and `out_upper` must be valid for writes.
enum CpiStatus cpi_rank_indices(uintptr_t n,
                                double alpha,
                                double z,
                                uintptr_t *out_lower,
                                uintptr_t *out_upper);

// Builds a calibration state from `n` PIT values in `[0, 1]`.
//
// # Safety
// `pits` must point to `n` readable doubles; `out_state` must be valid for writes.
enum CpiStatus cpi_calibration_from_pits(const double *pits,
                                         uintptr_t n,
                                         uint64_t tie_seed,
                                         struct CpiCalibration **out_state);

// # Safety
// `state` must be NULL or a pointer returned by [`cpi_calibration_from_pits`]
// that has not been freed.
void cpi_calibration_free(struct CpiCalibration *state);

// Number of calibration points, 0 for NULL.
//
// # Safety
// `state` must be NULL or a live calibration handle.
uintptr_t cpi_calibration_len(const struct CpiCalibration *state);

// PIT cutoffs `(u_lo, u_hi)` for CPI or DCP at starting point `z`.
//
// # Safety
// `state` must be a live calibration handle; the out pointers must be valid for writes.
enum CpiStatus cpi_calibration_cutoffs(const struct CpiCalibration *state,
                                       enum CpiMethod method,
                                       double alpha,
                                       double z,
                                       double *out_lo,
                                       double *out_hi);

// Fits a hazard CDF on `rows × cols` features `x` and responses `y`.
// `bins = 0` selects the default of 100; `max_epochs = 0` keeps the
// default epoch budget.
//
// # Safety
// `x` must point to `rows * cols` doubles, `y` to `rows` doubles, and
// `out_model` must be valid for writes.
enum CpiStatus cpi_hazard_fit(const double *x,
                              const double *y,
                              uintptr_t rows,
                              uintptr_t cols,
                              uintptr_t bins,
                              uint64_t seed,
                              uintptr_t max_epochs,
                              struct CpiHazardModel **out_model);

// # Safety
// `model` must be NULL or a live hazard handle. Predictors built from it
// keep their own reference and stay usable.
void cpi_hazard_free(struct CpiHazardModel *model);

// `F(y | x)` for one feature row of length `cols`.
//
// # Safety
// `model` must be a live hazard handle, `x` must point to `cols` doubles
// and `out_value` must be valid for writes.
enum CpiStatus cpi_hazard_cdf(const struct CpiHazardModel *model,
                              const double *x,
                              uintptr_t cols,
                              double y,
                              double *out_value);

// `Q(u | x)` for one feature row of length `cols`, `u ∈ [0, 1]`.
//
// # Safety
// As for [`cpi_hazard_cdf`].
enum CpiStatus cpi_hazard_quantile(const struct CpiHazardModel *model,
                                   const double *x,
                                   uintptr_t cols,
                                   double u,
                                   double *out_value);

// Creates an uncalibrated predictor. A `z` in `[0, alpha]` fixes the
// starting point; a negative `z` searches the default grid per test point.
//
// # Safety
// `model` must be a live hazard handle; `out_predictor` must be valid for writes.
enum CpiStatus cpi_predictor_new(const struct CpiHazardModel *model,
                                 enum CpiMethod method,
                                 double alpha,
                                 double z,
                                 uint64_t tie_seed,
                                 struct CpiPredictor **out_predictor);

// # Safety
// `predictor` must be NULL or a live predictor handle.
void cpi_predictor_free(struct CpiPredictor *predictor);

// Calibrates on `rows` held-out points, replacing any earlier calibration.
//
// # Safety
// `predictor` must be a live predictor handle; `x` must point to
// `rows * cols` doubles and `y` to `rows` doubles.
enum CpiStatus cpi_predictor_calibrate(struct CpiPredictor *predictor,
                                       const double *x,
                                       const double *y,
                                       uintptr_t rows,
                                       uintptr_t cols);

// Writes one interval per feature row into `out_lo[i]`, `out_hi[i]`.
//
// # Safety
// `predictor` must be a live predictor handle; `x` must point to
// `rows * cols` doubles; `out_lo` and `out_hi` must each hold `rows` doubles.
enum CpiStatus cpi_predictor_predict(const struct CpiPredictor *predictor,
                                     const double *x,
                                     uintptr_t rows,
                                     uintptr_t cols,
                                     double *out_lo,
                                     double *out_hi);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CPI_H */
