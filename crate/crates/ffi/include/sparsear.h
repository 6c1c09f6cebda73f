#ifndef SPARSEAR_H
#define SPARSEAR_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SarSolver {
  SAR_SOLVER_NNSP = 0,
  SAR_SOLVER_MIO = 1,
  SAR_SOLVER_MIO_DVP = 2,
} SarSolver;

typedef enum SarStatus {
  SAR_STATUS_OK = 0,
  SAR_STATUS_NULL_POINTER = 1,
  SAR_STATUS_INVALID_ARGUMENT = 2,
  SAR_STATUS_TOO_SHORT = 3,
  SAR_STATUS_NON_FINITE = 4,
  SAR_STATUS_NUMERICAL = 5,
  SAR_STATUS_BUFFER_TOO_SMALL = 6,
  SAR_STATUS_OUT_OF_RANGE = 7,
  SAR_STATUS_MASKED = 8,
  SAR_STATUS_PANIC = 9,
} SarStatus;

/**
 * Result of a single-series or segmented fit.
 */
typedef struct SarFit SarFit;

typedef struct SarGrid SarGrid;

typedef struct SarGridFit SarGridFit;

/**
 * Model settings. `tau0` is only read by `SAR_SOLVER_MIO_DVP` and is capped
 * at `order`.
 */
typedef struct SarConfig {
  size_t order;
  size_t sparsity;
  enum SarSolver solver;
  size_t tau0;
  double big_m;
} SarConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Fills `out` with the defaults: solver MIO, `big_m` 5, `tau0` 10.
 *
 * # Safety
 * `out` must be null or point to writable memory for one `SarConfig`.
 */
void sar_config_default(struct SarConfig *out);

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *sar_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *sar_version(void);

/**
 * Fits one series.
 *
 * # Safety
 * `values` must point to `len` doubles; `cfg` to a valid config; `out` to
 * writable storage for one pointer. Free the result with [`sar_fit_free`].
 */
enum SarStatus sar_fit_series(const double *values,
                              size_t len,
                              const struct SarConfig *cfg,
                              struct SarFit **out);

/**
 * Cuts the series into segments of `segment_length` and fits them on one
 * shared support. Each segment becomes one coefficient block.
 *
 * # Safety
 * As [`sar_fit_series`].
 */
enum SarStatus sar_fit_segmented(const double *values,
                                 size_t len,
                                 size_t segment_length,
                                 const struct SarConfig *cfg,
                                 struct SarFit **out);

/**
 * # Safety
 * `fit` must come from a `sar_fit_*` constructor and not be freed yet; null is ignored.
 */
void sar_fit_free(struct SarFit *fit);

/**
 * # Safety
 * `fit` must be a live handle.
 */
double sar_fit_objective(const struct SarFit *fit);

/**
 * Optimality gap; infinite for the greedy solver.
 *
 * # Safety
 * `fit` must be a live handle.
 */
double sar_fit_gap(const struct SarFit *fit);

/**
 * # Safety
 * `fit` must be a live handle.
 */
bool sar_fit_certified(const struct SarFit *fit);

/**
 * # Safety
 * `fit` must be a live handle.
 */
size_t sar_fit_nodes(const struct SarFit *fit);

/**
 * # Safety
 * `fit` must be a live handle.
 */
size_t sar_fit_order(const struct SarFit *fit);

/**
 * Number of coefficient blocks (1 for a single series, else segments).
 *
 * # Safety
 * `fit` must be a live handle.
 */
size_t sar_fit_block_count(const struct SarFit *fit);

/**
 * # Safety
 * `fit` must be a live handle.
 */
size_t sar_fit_support_len(const struct SarFit *fit);

/**
 * Copies the 1-based support lags, ascending, into `lags[0..cap]`.
 *
 * # Safety
 * `fit` must be a live handle; `lags` must hold `cap` elements.
 */
enum SarStatus sar_fit_support(const struct SarFit *fit, size_t *lags, size_t cap);

/**
 * Copies block `block`'s length-`d` coefficients (index `k − 1` holds lag `k`).
 *
 * # Safety
 * `fit` must be a live handle; `out` must hold `cap` doubles.
 */
enum SarStatus sar_fit_coefficients(const struct SarFit *fit,
                                    size_t block,
                                    double *out,
                                    size_t cap);

/**
 * Creates an all-masked grid of `rows × cols` cells with `segments` segments
 * whose lengths are `segment_lengths[0..segments]`.
 *
 * # Safety
 * `segment_lengths` must point to `segments` values; `out` to pointer storage.
 */
enum SarStatus sar_grid_new(size_t rows,
                            size_t cols,
                            const size_t *segment_lengths,
                            size_t segments,
                            struct SarGrid **out);

/**
 * Stores the series of 0-based cell `(m, n, gamma)`.
 *
 * # Safety
 * `grid` must be a live handle; `values` must point to `len` doubles.
 */
enum SarStatus sar_grid_set_cell(struct SarGrid *grid,
                                 size_t m,
                                 size_t n,
                                 size_t gamma,
                                 const double *values,
                                 size_t len);

/**
 * # Safety
 * `grid` must come from [`sar_grid_new`] and not be freed yet; null is ignored.
 */
void sar_grid_free(struct SarGrid *grid);

/**
 * Two-stage grid fit: global support from pooled statistics, then per-cell
 * coefficients on it.
 *
 * # Safety
 * `grid` must be a live handle, `cfg` a valid config, `out` pointer storage.
 */
enum SarStatus sar_fit_grid(const struct SarGrid *grid,
                            const struct SarConfig *cfg,
                            struct SarGridFit **out);

/**
 * # Safety
 * `fit` must come from [`sar_fit_grid`] and not be freed yet; null is ignored.
 */
void sar_grid_fit_free(struct SarGridFit *fit);

/**
 * # Safety
 * `fit` must be a live handle.
 */
size_t sar_grid_fit_support_len(const struct SarGridFit *fit);

/**
 * Copies the 1-based global support lags into `lags[0..cap]`.
 *
 * # Safety
 * `fit` must be a live handle; `lags` must hold `cap` elements.
 */
enum SarStatus sar_grid_fit_support(const struct SarGridFit *fit, size_t *lags, size_t cap);

/**
 * # Safety
 * `fit` must be a live handle.
 */
double sar_grid_fit_global_objective(const struct SarGridFit *fit);

/**
 * # Safety
 * `fit` must be a live handle.
 */
bool sar_grid_fit_certified(const struct SarGridFit *fit);

/**
 * Copies the coefficients of 0-based cell `(m, n, gamma)`, one per support
 * lag in ascending lag order. Returns `SAR_STATUS_MASKED` for masked cells.
 *
 * # Safety
 * `fit` must be a live handle; `out` must hold `cap` doubles.
 */
enum SarStatus sar_grid_fit_cell(const struct SarGridFit *fit,
                                 size_t m,
                                 size_t n,
                                 size_t gamma,
                                 double *out,
                                 size_t cap);

/**
 * Writes the coefficient of 1-based `lag` for every cell, in
 * `((m · cols) + n) · segments + gamma` order, NaN for masked cells.
 * `cap` must be at least `rows · cols · segments`.
 *
 * # Safety
 * `fit` must be a live handle; `out` must hold `cap` doubles.
 */
enum SarStatus sar_grid_fit_seasonality(const struct SarGridFit *fit,
                                        size_t lag,
                                        double *out,
                                        size_t cap);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPARSEAR_H */
