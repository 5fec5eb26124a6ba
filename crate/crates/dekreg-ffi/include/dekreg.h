/* C interface for the dekreg kernel regression estimators. */

#ifndef DEKREG_H
#define DEKREG_H

/* Generated by cbindgen; regenerate with `cargo build -p dekreg-ffi --features generate-header`. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Kernel choices exposed through the C ABI.
 */
typedef enum DekregKernel {
  DEKREG_KERNEL_GAUSSIAN = 0,
  DEKREG_KERNEL_EPANECHNIKOV = 1,
} DekregKernel;

/**
 * Pointwise estimators exposed through the C ABI. `DE1` uses the `k` and
 * `lambda` arguments of the call; the polynomial methods ignore them.
 */
typedef enum DekregMethod {
  DEKREG_METHOD_NW = 0,
  DEKREG_METHOD_LL = 1,
  DEKREG_METHOD_LQ = 2,
  DEKREG_METHOD_LC = 3,
  DEKREG_METHOD_DE1 = 4,
} DekregMethod;

/**
 * Status codes returned by every fallible call.
 */
typedef enum DekregStatus {
  DEKREG_STATUS_OK = 0,
  /**
   * A required pointer argument was NULL.
   */
  DEKREG_STATUS_NULL_ARGUMENT = 1,
  /**
   * Arguments violate a documented precondition.
   */
  DEKREG_STATUS_INVALID_ARGUMENT = 2,
  /**
   * The estimator is undefined at the requested point (empty kernel
   * neighborhood or singular local system).
   */
  DEKREG_STATUS_UNDEFINED = 3,
  /**
   * A numeric procedure failed (non-convergence, domain error,
   * estimation or selection failure).
   */
  DEKREG_STATUS_NUMERIC_ERROR = 4,
} DekregStatus;

/**
 * Opaque dataset handle.
 */
typedef struct DekregDataset DekregDataset;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Build a dataset from parallel arrays of length `len`. On success writes
 * a heap-owned handle to `out`; release it with [`dekreg_dataset_free`].
 *
 * # Safety
 * `x` and `y` must point to `len` readable doubles; `out` must be a valid
 * pointer.
 */
enum DekregStatus dekreg_dataset_new(const double *x,
                                     const double *y,
                                     size_t len,
                                     struct DekregDataset **out);

/**
 * Release a dataset handle. NULL is a no-op.
 *
 * # Safety
 * `dataset` must be NULL or a pointer returned by [`dekreg_dataset_new`]
 * that has not been freed yet.
 */
void dekreg_dataset_free(struct DekregDataset *dataset);

/**
 * Number of observations, or 0 for NULL.
 *
 * # Safety
 * `dataset` must be NULL or a live handle.
 */
size_t dekreg_dataset_len(const struct DekregDataset *dataset);

/**
 * Evaluate one pointwise estimator at `x0`.
 *
 * # Safety
 * `dataset` must be a live handle and `out` a valid pointer.
 */
enum DekregStatus dekreg_fit_at(const struct DekregDataset *dataset,
                                enum DekregMethod method,
                                size_t k,
                                double lambda,
                                double h,
                                enum DekregKernel kernel,
                                double x0,
                                double *out);

/**
 * Evaluate an estimator over a grid of `grid_len` points. `out_values[i]`
 * receives the fitted value where `out_defined[i]` is 1, and NaN where it
 * is 0 (undefined neighborhood at that grid point).
 *
 * # Safety
 * `dataset` must be a live handle; `grid` must hold `grid_len` readable
 * doubles; `out_values` and `out_defined` must hold `grid_len` writable
 * elements.
 */
enum DekregStatus dekreg_fit_curve(const struct DekregDataset *dataset,
                                   enum DekregMethod method,
                                   size_t k,
                                   double lambda,
                                   double h,
                                   enum DekregKernel kernel,
                                   const double *grid,
                                   size_t grid_len,
                                   double *out_values,
                                   uint8_t *out_defined);

/**
 * Half-median-spacing rule-of-thumb bandwidth.
 *
 * # Safety
 * `dataset` must be a live handle and `out` a valid pointer.
 */
enum DekregStatus dekreg_rot_bandwidth(const struct DekregDataset *dataset, double *out);

/**
 * Leave-one-out cross-validated bandwidth over the default grid. Writes
 * the winning bandwidth and its prediction-error score.
 *
 * # Safety
 * `dataset` must be a live handle; `out_h` and `out_score` valid pointers.
 */
enum DekregStatus dekreg_loocv_bandwidth(const struct DekregDataset *dataset,
                                         enum DekregMethod method,
                                         size_t k,
                                         double lambda,
                                         enum DekregKernel kernel,
                                         double *out_h,
                                         double *out_score);

/**
 * Two-parameter exponential fit `y = c e^{lambda x}`.
 *
 * # Safety
 * `dataset` must be a live handle; `out_c` and `out_lambda` valid
 * pointers.
 */
enum DekregStatus dekreg_nls_exponential(const struct DekregDataset *dataset,
                                         double *out_c,
                                         double *out_lambda);

/**
 * Sub-exponential exponent estimate from the log-log regression slope.
 *
 * # Safety
 * `dataset` must be a live handle and `out` a valid pointer.
 */
enum DekregStatus dekreg_estimate_alpha(const struct DekregDataset *dataset, double *out);

/**
 * Growth-rate estimate for the sub-exponential law at a given alpha.
 *
 * # Safety
 * `dataset` must be a live handle and `out` a valid pointer.
 */
enum DekregStatus dekreg_estimate_lambda_subexp(const struct DekregDataset *dataset,
                                                double alpha,
                                                double *out);

/**
 * Copy the thread-local message for the most recent failure into `buf`
 * (NUL-terminated, truncated to `len`). Returns the full message length
 * including the terminator, or 0 when no error has occurred on this
 * thread.
 *
 * # Safety
 * `buf` must be NULL (to query the length) or point to `len` writable
 * bytes.
 */
size_t dekreg_last_error_message(char *buf, size_t len);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* DEKREG_H */
