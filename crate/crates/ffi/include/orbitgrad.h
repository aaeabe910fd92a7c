#ifndef ORBITGRAD_H
#define ORBITGRAD_H

/* Generated with cbindgen:0.29.4 */

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of fallible calls.
 */
typedef enum OgStatus {
  OG_STATUS_OK = 0,
  OG_STATUS_NULL_POINTER = 1,
  OG_STATUS_INVALID_ARGUMENT = 2,
  OG_STATUS_INVALID_SHAPE = 3,
  OG_STATUS_NOT_A_GROUP = 4,
  OG_STATUS_DEGENERATE_WEIGHTS = 5,
  OG_STATUS_NUMERICAL = 6,
  OG_STATUS_IO = 7,
  OG_STATUS_PANIC = 8,
} OgStatus;

/**
 * Finite group used by the exact orbit target.
 */
typedef enum OgGroup {
  /**
   * `{+1, -1}` acting on every coordinate.
   */
  OG_GROUP_REFLECTION = 0,
  /**
   * All permutations of `param` blocks of size `dim / param`.
   */
  OG_GROUP_SYMMETRIC = 1,
  /**
   * Cyclic translations `k / param` of every coordinate (torus).
   */
  OG_GROUP_CYCLIC_TRANSLATION = 2,
} OgGroup;

/**
 * Trained denoiser loaded from a checkpoint (opaque).
 */
typedef struct OgDenoiser OgDenoiser;

/**
 * Discrete noise schedule (opaque).
 */
typedef struct OgSchedule OgSchedule;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread. Valid until the next
 * failing call on the same thread; never null.
 */
const char *og_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *og_version(void);

/**
 * Variance-preserving schedule with linear betas in `[1e-4, 0.02]`.
 */
enum OgStatus og_schedule_vp_linear(uintptr_t steps, struct OgSchedule **out);

/**
 * `alpha = 1` schedule with geometric sigma from `sigma_min` to `sigma_max`.
 */
enum OgStatus og_schedule_ve_geometric(uintptr_t steps,
                                       double sigma_min,
                                       double sigma_max,
                                       struct OgSchedule **out);

/**
 * Releases a schedule; null is ignored.
 */
void og_schedule_free(struct OgSchedule *schedule);

/**
 * Number of steps `T`.
 */
enum OgStatus og_schedule_steps(const struct OgSchedule *schedule, uintptr_t *out);

/**
 * `(alpha_t, sigma_t)` for `t` in `0..=T`.
 */
enum OgStatus og_schedule_level(const struct OgSchedule *schedule,
                                uintptr_t t,
                                double *alpha,
                                double *sigma);

/**
 * Exact orbit-weighted target for a finite group, written to `out[0..dim]`.
 *
 * Euclidean groups use the Gaussian kernel; `CyclicTranslation` uses the
 * wrapped normal on `[0, 1)^dim` with `param` as the order. For `Symmetric`,
 * `param` is the number of equal-size blocks.
 */
enum OgStatus og_exact_orbit_target(const struct OgSchedule *schedule,
                                    enum OgGroup group,
                                    uintptr_t param,
                                    const double *x0,
                                    const double *xt,
                                    uintptr_t dim,
                                    uintptr_t t,
                                    double *out);

/**
 * Log density of the wrapped normal `N(delta; 0, sigma^2)` on the unit circle.
 */
enum OgStatus og_wrapped_normal_log_pdf(double delta, double sigma, double *out);

/**
 * Conditional means for the two-point dataset `{0, 1}`:
 * `lhs = phi(xt + a)` and `rhs = phi(xt) + a`.
 */
enum OgStatus og_counterexample(double alpha,
                                double sigma,
                                double xt,
                                double a,
                                double *lhs,
                                double *rhs);

/**
 * Loads a checkpoint written by the `orbitgrad train` command.
 */
enum OgStatus og_denoiser_load(const char *path, struct OgDenoiser **out);

/**
 * Releases a denoiser; null is ignored.
 */
void og_denoiser_free(struct OgDenoiser *denoiser);

/**
 * Point dimension the denoiser expects.
 */
enum OgStatus og_denoiser_dim(const struct OgDenoiser *denoiser, uintptr_t *out);

/**
 * Evaluates the denoiser at `x[0..dim]` and normalized time `t_norm = t / T`.
 */
enum OgStatus og_denoiser_forward(const struct OgDenoiser *denoiser,
                                  const double *x,
                                  uintptr_t dim,
                                  double t_norm,
                                  double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ORBITGRAD_H */
