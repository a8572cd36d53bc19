#ifndef AFFINELAB_H
#define AFFINELAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

#define AL_OK 0

/**
 * A required pointer argument was null.
 */
#define AL_ERR_NULL 1

/**
 * A string argument was not valid UTF-8.
 */
#define AL_ERR_UTF8 2

/**
 * Unknown surface, parse error, bad configuration or inadmissible `mu`.
 */
#define AL_ERR_CONFIG 3

/**
 * The computation failed (degenerate or non-convex point, outside the tube, ...).
 */
#define AL_ERR_COMPUTE 4

/**
 * Output buffer too small or argument length mismatch.
 */
#define AL_ERR_LENGTH 5

/**
 * A panic was caught at the boundary.
 */
#define AL_ERR_PANIC 6

#define AL_VERDICT_ISOPARAMETRIC 0

#define AL_VERDICT_NOT_ISOPARAMETRIC 1

#define AL_VERDICT_INCONCLUSIVE 2

/**
 * Opaque surface handle.
 */
typedef struct AlSurface AlSurface;

/**
 * Invariants at one parameter point of a surface of dimension `n`.
 * Caller-owned buffers: `y` has `n + 1` entries, `lambda` has `n`.
 */
typedef struct AlInvariants {
  double *y;
  double *lambda;
  /**
   * Affine mean curvature.
   */
  double l1;
  /**
   * Squared Fubini-Pick norm.
   */
  double pick_norm_sq;
  /**
   * Determinant of the Blaschke metric.
   */
  double det_g;
} AlInvariants;

/**
 * Parallel-family data at one point; `lambda_mu` has `n` entries.
 */
typedef struct AlParallel {
  double det_t;
  double c;
  double *lambda_mu;
} AlParallel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after success.
 * The pointer stays valid until the next call on this thread.
 */
const char *al_last_error(void);

/**
 * Create a surface from a catalog name such as `sphere(1)` or `custom:1/(u*v)`.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a valid pointer.
 */
int32_t al_surface_new(const char *name, struct AlSurface **out);

/**
 * Release a handle; null is ignored.
 *
 * # Safety
 * `s` must come from `al_surface_new` and not be freed twice.
 */
void al_surface_free(struct AlSurface *s);

/**
 * Number of parameters of the surface.
 *
 * # Safety
 * `s` must be a live handle and `out` a valid pointer.
 */
int32_t al_surface_dim(const struct AlSurface *s, uintptr_t *out);

/**
 * Blaschke invariants at `u` (length `n`) with jets of order `order`.
 *
 * # Safety
 * `s` must be a live handle, `u` must hold `n` doubles and the buffers of `out`
 * must have the documented lengths.
 */
int32_t al_invariants(const struct AlSurface *s,
                      const double *u,
                      uintptr_t n,
                      uint32_t order,
                      struct AlInvariants *out);

/**
 * Transfer data of the parallel hypersurface `x + mu Y` at `u`.
 *
 * # Safety
 * As for `al_invariants`; `out.lambda_mu` must hold `n` doubles.
 */
int32_t al_parallel(const struct AlSurface *s,
                    const double *u,
                    uintptr_t n,
                    double mu,
                    uint32_t order,
                    struct AlParallel *out);

/**
 * Constant-principal-curvature verdict over `count` points stored row-major in
 * `grid` (`count * dim` doubles). On an isoparametric verdict the constant
 * curvatures are written to `lambda` (`dim` doubles) when it is non-null.
 *
 * # Safety
 * `grid` must hold `count * dim` doubles and `verdict` must be valid.
 */
int32_t al_detect(const struct AlSurface *s,
                  const double *grid,
                  uintptr_t count,
                  uint32_t order,
                  int32_t *verdict,
                  double *lambda);

/**
 * Run `invariants`, `parallel`, `isoparametric` or `verify-all` with a JSON
 * configuration (null for defaults) and return the JSON report in `*out`,
 * to be released with `al_string_free`. `*passed` is 1 when the run meets the
 * exit-0 contract of the command-line tool.
 *
 * # Safety
 * String arguments must be NUL-terminated; `out` and `passed` must be valid.
 */
int32_t al_run_json(const char *command, const char *config_json, char **out, int32_t *passed);

/**
 * Release a string returned by this library; null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void al_string_free(char *s);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* AFFINELAB_H */
