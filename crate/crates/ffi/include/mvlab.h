#ifndef MVLAB_H
#define MVLAB_H

/* Generated by cbindgen from mvlab-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible call.
 */
enum MvStatus
#ifdef __cplusplus
  : int32_t
#endif // __cplusplus
 {
  MV_STATUS_OK = 0,
  MV_STATUS_NULL_ARGUMENT = -1,
  MV_STATUS_UNKNOWN_MODEL = -2,
  MV_STATUS_INVALID_PARAMETER = -3,
  MV_STATUS_NUMERICAL_FAILURE = -4,
  MV_STATUS_NO_SUCH_ROOT = -5,
  MV_STATUS_BUFFER_TOO_SMALL = -6,
};
#ifndef __cplusplus
typedef int32_t MvStatus;
#endif // __cplusplus

/**
 * Opaque handle to a grid measure.
 */
typedef struct MvMeasure MvMeasure;

/**
 * Opaque handle to a model instance.
 */
typedef struct MvModel MvModel;

/**
 * One fixed-point root of the statistic equation.
 */
typedef struct MvRoot {
  double m;
  double psi_prime;
  /**
   * -1 stable candidate, +1 unstable candidate, 0 marginal.
   */
  int32_t classification;
  double residual;
} MvRoot;

/**
 * Spectral summary of the linearised generator.
 */
typedef struct MvSpectralReport {
  double lambda_q;
  double lambda_p;
  double zero_residual;
  /**
   * 1 when the zero eigenvalue is simple, else 0.
   */
  int32_t zero_simple;
  uint32_t basis_size;
} MvSpectralReport;

/**
 * Fitted exponential decay of a distance trajectory.
 */
typedef struct MvRateFit {
  double rate;
  double log_prefactor;
  double r_squared;
  double window_start;
  double window_end;
  double rate_stderr;
  double noise_floor;
} MvRateFit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy the last error message into `buf` (NUL-terminated, truncating);
 * returns the full message length in bytes excluding the terminator.
 *
 * # Safety
 * `buf` must point to `len` writable bytes, or be NULL (query mode).
 */
uintptr_t mvlab_last_error_message(char *buf, uintptr_t len);

/**
 * Library version string (static, NUL-terminated).
 */
const char *mvlab_version(void);

/**
 * Create a model. `name` is one of "dawson", "gausscos1d", "gausscos2d",
 * "subgaussian", "oubaseline".
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` must be a valid pointer.
 */
MvStatus mvlab_model_new(const char *name, double beta, double sigma, struct MvModel **out);

/**
 * Release a model handle. NULL is ignored.
 *
 * # Safety
 * `model` must have come from `mvlab_model_new` and not yet be freed.
 */
void mvlab_model_free(struct MvModel *model);

/**
 * Build the frozen-statistic stationary candidate measure at statistic
 * value `s`, with automatic truncation. `panels` of 0 picks the default.
 *
 * # Safety
 * `model` and `out` must be valid pointers.
 */
MvStatus mvlab_stationary_measure(const struct MvModel *model,
                                  double s,
                                  uintptr_t panels,
                                  struct MvMeasure **out);

/**
 * Release a measure handle. NULL is ignored.
 *
 * # Safety
 * `measure` must have come from this library and not yet be freed.
 */
void mvlab_measure_free(struct MvMeasure *measure);

/**
 * Mean of the measure.
 *
 * # Safety
 * Pointers must be valid.
 */
MvStatus mvlab_measure_mean(const struct MvMeasure *measure, double *out);

/**
 * Variance of the measure.
 *
 * # Safety
 * Pointers must be valid.
 */
MvStatus mvlab_measure_variance(const struct MvMeasure *measure, double *out);

/**
 * Quantile at level `p` in (0, 1).
 *
 * # Safety
 * Pointers must be valid.
 */
MvStatus mvlab_measure_quantile(const struct MvMeasure *measure, double p, double *out);

/**
 * Fill `buf` with `len` reproducible i.i.d. draws for the given seed.
 *
 * # Safety
 * `buf` must point to `len` writable doubles.
 */
MvStatus mvlab_measure_sample(const struct MvMeasure *measure,
                              uintptr_t len,
                              uint64_t seed,
                              double *buf);

/**
 * Find all fixed-point roots of the statistic equation on [lo, hi] with a
 * `grid`-point scan (0 picks 257). Writes at most `cap` roots into `roots`
 * and stores the total count in `out_len`; returns `BufferTooSmall` when
 * more roots exist than fit.
 *
 * # Safety
 * `roots` must point to `cap` writable entries; `out_len` must be valid.
 */
MvStatus mvlab_find_roots(const struct MvModel *model,
                          double lo,
                          double hi,
                          uintptr_t grid,
                          struct MvRoot *roots,
                          uintptr_t cap,
                          uintptr_t *out_len);

/**
 * Spectrum of the linearised generator at the fixed point `s` with a
 * basis of `basis_size` functions (0 picks 40). Fills the report, and up
 * to `cap` eigenvalues (descending real part) into `eig_re`/`eig_im`;
 * `out_len` receives the number written.
 *
 * # Safety
 * Buffers must match `cap`; all out-pointers must be valid (eigenvalue
 * buffers may be NULL with cap 0 to fetch the report alone).
 */
MvStatus mvlab_spectrum(const struct MvModel *model,
                        double s,
                        uintptr_t basis_size,
                        struct MvSpectralReport *report,
                        double *eig_re,
                        double *eig_im,
                        uintptr_t cap,
                        uintptr_t *out_len);

/**
 * Simulate the interacting ensemble from the stationary candidate at root
 * value `s` shifted by `shift`, and fit the exponential decay rate of the
 * Wasserstein distance back to it.
 *
 * # Safety
 * `model` and `out` must be valid pointers.
 */
MvStatus mvlab_rate_fit(const struct MvModel *model,
                        double s,
                        double shift,
                        uintptr_t n_particles,
                        double dt,
                        double t_final,
                        uint64_t seed,
                        struct MvRateFit *out);

/**
 * Stochastic-integral gradient estimate of the frozen semigroup for the
 * identity observable: d/dx E[Y_t | Y_0 = x] in direction `v`.
 *
 * # Safety
 * `model`, `out_estimate`, and `out_stderr` must be valid pointers.
 */
MvStatus mvlab_gradient_estimate(const struct MvModel *model,
                                 double s_frozen,
                                 double x0,
                                 double v,
                                 double t,
                                 uintptr_t paths,
                                 double dt,
                                 uint64_t seed,
                                 double *out_estimate,
                                 double *out_stderr);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* MVLAB_H */
