#ifndef HELICAL_LAB_H
#define HELICAL_LAB_H

#pragma once

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum HlStatus {
  HL_STATUS_OK = 0,
  HL_STATUS_NULL_POINTER = 1,
  HL_STATUS_INVALID_ARGUMENT = 2,
  HL_STATUS_DEGENERATE_CURVE = 3,
  HL_STATUS_OUT_OF_REGION = 4,
  HL_STATUS_NO_CONVERGENCE = 5,
  HL_STATUS_CONFIG_INVALID = 6,
  HL_STATUS_IO = 7,
  HL_STATUS_BUFFER_TOO_SMALL = 8,
  HL_STATUS_PANIC = 9,
  HL_STATUS_OTHER = 10,
} HlStatus;

/**
 * A validated experiment configuration.
 */
typedef struct HlConfig HlConfig;

/**
 * A curve `γ: [a,b] → ℝⁿ`.
 */
typedef struct HlCurve HlCurve;

/**
 * The summaries of one run.
 */
typedef struct HlRun HlRun;

/**
 * Critical-point data of the phase at a frequency. Missing roots are NaN.
 */
typedef struct HlRoots {
  double theta2;
  double u;
  double theta1_minus;
  double theta1_plus;
  uint32_t root_count;
} HlRoots;

/**
 * A log-log fit.
 */
typedef struct HlFit {
  double slope;
  double intercept;
  double residual;
  size_t n_points;
} HlFit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *hl_version(void);

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length, 0 if none.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t hl_last_error_message(char *buf, size_t len);

/**
 * The moment curve `(s, s²/2, …, sⁿ/n!)`.
 *
 * # Safety
 * `out` must be a valid pointer; on success it receives a handle owned by the caller.
 */
enum HlStatus hl_curve_moment(size_t n, struct HlCurve **out);

/**
 * The helix `(r cos s, r sin s, h s)`.
 *
 * # Safety
 * `out` must be a valid pointer; on success it receives a handle owned by the caller.
 */
enum HlStatus hl_curve_helix(double radius, double pitch, struct HlCurve **out);

/**
 * A polynomial curve: `coefficients` is row-major `dim × terms`, entry
 * `(i, m)` being the coefficient of `s^m` in component `i`.
 *
 * # Safety
 * `coefficients` must point to `dim * terms` doubles and `out` must be valid.
 */
enum HlStatus hl_curve_polynomial(const double *coefficients,
                                  size_t dim,
                                  size_t terms,
                                  struct HlCurve **out);

/**
 * Releases a curve handle. Null is a no-op.
 *
 * # Safety
 * `curve` must be null or a handle from this library not yet freed.
 */
void hl_curve_free(struct HlCurve *curve);

/**
 * Ambient dimension of the curve, 0 for a null handle.
 *
 * # Safety
 * `curve` must be null or a live handle.
 */
size_t hl_curve_dim(const struct HlCurve *curve);

/**
 * Writes the `order`-th derivative `γ^{(order)}(s)` into `out[0..len]`;
 * `len` must equal the dimension.
 *
 * # Safety
 * `curve` must be a live handle and `out` must point to `len` doubles.
 */
enum HlStatus hl_curve_derivative(const struct HlCurve *curve,
                                  size_t order,
                                  double s,
                                  double *out,
                                  size_t len);

/**
 * `det[γ'(s) … γ^{(n)}(s)]`.
 *
 * # Safety
 * `curve` must be a live handle and `out` valid.
 */
enum HlStatus hl_curve_det(const struct HlCurve *curve, double s, double *out);

/**
 * Frenet frame at `s`: `basis` receives the `n × n` frame row by row
 * (row `j` is `e_{j+1}`), `curvatures` the `n − 1` curvatures.
 *
 * # Safety
 * `basis` must hold `n*n` doubles and `curvatures` `n-1` doubles (or be null).
 */
enum HlStatus hl_curve_frenet(const struct HlCurve *curve,
                              double s,
                              double *basis,
                              size_t basis_len,
                              double *curvatures,
                              size_t curvatures_len);

/**
 * Critical points of `s ↦ ⟨γ(s), ξ⟩` near the origin, for `ξ ∈ ℝ³`.
 *
 * # Safety
 * `xi` must point to 3 doubles and `out` must be valid.
 */
enum HlStatus hl_roots(const struct HlCurve *curve, const double *xi, struct HlRoots *out);

/**
 * The averaging multiplier `m(ξ, t)` with the wide cutoff; `xi` has the
 * curve's dimension.
 *
 * # Safety
 * `xi` must point to `len` doubles; `re` and `im` must be valid.
 */
enum HlStatus hl_multiplier(const struct HlCurve *curve,
                            const double *xi,
                            size_t len,
                            double t,
                            double *re,
                            double *im);

/**
 * Log-log fit of `|m(R·direction, t)|` over `R = 2^lo … 2^hi`.
 *
 * # Safety
 * `direction` must point to the curve's dimension of doubles; `out` must be valid.
 */
enum HlStatus hl_decay_fit(const struct HlCurve *curve,
                           const double *direction,
                           double t,
                           int32_t log2_lo,
                           int32_t log2_hi,
                           struct HlFit *out);

/**
 * Loads and validates a config file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` valid.
 */
enum HlStatus hl_config_load(const char *path, struct HlConfig **out);

/**
 * Overrides the seed and, if `output` is non-null, the output directory.
 *
 * # Safety
 * `config` must be a live handle; `output` null or NUL-terminated.
 */
enum HlStatus hl_config_override(struct HlConfig *config, uint64_t seed, const char *output);

/**
 * Releases a config handle. Null is a no-op.
 *
 * # Safety
 * `config` must be null or a handle from this library not yet freed.
 */
void hl_config_free(struct HlConfig *config);

/**
 * Runs the configured experiments, writing artifacts to the config's
 * output directory. A run whose checks fail still succeeds here; query
 * the verdict with [`hl_run_passed`].
 *
 * # Safety
 * `config` must be a live handle and `out` valid.
 */
enum HlStatus hl_run(const struct HlConfig *config, size_t threads, struct HlRun **out);

/**
 * 1 if no check of the run failed, 0 otherwise or for a null handle.
 *
 * # Safety
 * `run` must be null or a live handle.
 */
int32_t hl_run_passed(const struct HlRun *run);

/**
 * Number of checks in the run with the given verdict (0 pass, 1 fail, 2 skipped).
 *
 * # Safety
 * `run` must be null or a live handle.
 */
size_t hl_run_count(const struct HlRun *run, uint32_t verdict);

/**
 * Releases a run handle. Null is a no-op.
 *
 * # Safety
 * `run` must be null or a handle from this library not yet freed.
 */
void hl_run_free(struct HlRun *run);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HELICAL_LAB_H */
