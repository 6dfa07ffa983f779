#ifndef SVE_H
#define SVE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum SveStatus {
  SVE_STATUS_OK = 0,
  /**
   * Parameters outside their domain, mismatched dimensions or meshes.
   */
  SVE_STATUS_INVALID_ARGUMENT = 1,
  /**
   * Non-finite states or non-convergent quadrature.
   */
  SVE_STATUS_NUMERICAL_FAILURE = 2,
  /**
   * The requested exponential-sum tolerance could not be certified.
   */
  SVE_STATUS_SOE_FAILURE = 3,
  SVE_STATUS_NULL_POINTER = 4,
  /**
   * An output array is smaller than required.
   */
  SVE_STATUS_BUFFER_TOO_SMALL = 5,
  /**
   * A Rust panic was caught at the boundary.
   */
  SVE_STATUS_PANIC = 6,
} SveStatus;

/**
 * Graded mesh `t_n = T (n/N)^r`.
 */
typedef struct SveMesh SveMesh;

/**
 * Brownian increments on a mesh.
 */
typedef struct SvePath SvePath;

/**
 * Equation coefficients with kernel exponents.
 */
typedef struct SveProblem SveProblem;

/**
 * Certified sum-of-exponentials approximation of `t^{-γ}`.
 */
typedef struct SveSoe SveSoe;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread (empty if none). The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *sve_last_error_message(void);

/**
 * Seed of Monte Carlo path `index` derived from a master seed.
 */
uint64_t sve_path_seed(uint64_t master, uint64_t index);

/**
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum SveStatus sve_mesh_new(double horizon, size_t n, double r, struct SveMesh **out);

/**
 * # Safety
 * `mesh` must be null or a handle from [`sve_mesh_new`] not yet freed.
 */
void sve_mesh_free(struct SveMesh *mesh);

/**
 * Number of steps `N` (0 for a null handle).
 *
 * # Safety
 * `mesh` must be null or a live mesh handle.
 */
size_t sve_mesh_len(const struct SveMesh *mesh);

/**
 * Copy the `N + 1` nodes into `out`.
 *
 * # Safety
 * `mesh` must be a live mesh handle; `out` must point to `capacity` writable doubles.
 */
enum SveStatus sve_mesh_points(const struct SveMesh *mesh, double *out, size_t capacity);

/**
 * `∫_{t_i}^{t_{i+1}} (t_n - s)^{-α} ds`.
 *
 * # Safety
 * `mesh` must be a live mesh handle; `out` must point to one writable double.
 */
enum SveStatus sve_mesh_drift_weight(const struct SveMesh *mesh,
                                     size_t n,
                                     size_t i,
                                     double alpha,
                                     double *out);

/**
 * Build `t^{-γ} ≈ Σ ω_k e^{-τ_k t}` on `[δ, T]` with relative error `ε`.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum SveStatus sve_soe_build(double gamma,
                             double delta,
                             double horizon,
                             double eps,
                             struct SveSoe **out);

/**
 * # Safety
 * `soe` must be null or a handle from [`sve_soe_build`] not yet freed.
 */
void sve_soe_free(struct SveSoe *soe);

/**
 * Number of exponentials (0 for a null handle).
 *
 * # Safety
 * `soe` must be null or a live handle.
 */
size_t sve_soe_len(const struct SveSoe *soe);

/**
 * Copy rates and weights, each of length [`sve_soe_len`].
 *
 * # Safety
 * `soe` must be a live handle; `rates` and `weights` must each point to `capacity` writable doubles.
 */
enum SveStatus sve_soe_terms(const struct SveSoe *soe,
                             double *rates,
                             double *weights,
                             size_t capacity);

/**
 * Evaluate the expansion at `t` (NaN for a null handle).
 *
 * # Safety
 * `soe` must be null or a live handle.
 */
double sve_soe_eval(const struct SveSoe *soe, double t);

/**
 * Maximum relative error on `grid` log-spaced points of `[δ, T]`.
 *
 * # Safety
 * `soe` must be a live handle; `out` must point to one writable double.
 */
enum SveStatus sve_soe_verify(const struct SveSoe *soe, size_t grid, double *out);

/**
 * `f = -(1-α) sin(x/2)`, `g = cos(x/2)`, `x0 = 1`, `T = 1`.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum SveStatus sve_problem_sine_cosine(double alpha, double beta, struct SveProblem **out);

/**
 * Scalar `f = a1 x + a0`, `g = b1 x + b0`.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum SveStatus sve_problem_affine(double alpha,
                                  double beta,
                                  double horizon,
                                  double x0,
                                  double a1,
                                  double a0,
                                  double b1,
                                  double b0,
                                  struct SveProblem **out);

/**
 * # Safety
 * `problem` must be null or a problem handle not yet freed.
 */
void sve_problem_free(struct SveProblem *problem);

/**
 * Sample `m`-dimensional Brownian increments on `mesh`.
 *
 * # Safety
 * `mesh` must be a live mesh handle; `out` must be valid for one handle.
 */
enum SveStatus sve_path_sample(const struct SveMesh *mesh,
                               size_t m,
                               uint64_t seed,
                               struct SvePath **out);

/**
 * The same path on the nested mesh with `n_coarse` steps (exact block sums).
 *
 * # Safety
 * `path` must be a live path handle; `out` must be valid for one handle.
 */
enum SveStatus sve_path_coarsen(const struct SvePath *path, size_t n_coarse, struct SvePath **out);

/**
 * # Safety
 * `path` must be null or a path handle not yet freed.
 */
void sve_path_free(struct SvePath *path);

/**
 * Copy the `N × m` increments (row-major by step).
 *
 * # Safety
 * `path` must be a live path handle; `out` must point to `capacity` writable doubles.
 */
enum SveStatus sve_path_increments(const struct SvePath *path, double *out, size_t capacity);

/**
 * Euler–Maruyama on the path's mesh; writes `(N + 1) × d` states.
 *
 * # Safety
 * Handles must be live; `out` must point to `capacity` writable doubles.
 */
enum SveStatus sve_em_solve(const struct SveProblem *problem,
                            const struct SvePath *path,
                            double *out,
                            size_t capacity);

/**
 * Fast Euler–Maruyama with expansion tolerance `eps`.
 *
 * # Safety
 * Handles must be live; `out` must point to `capacity` writable doubles.
 */
enum SveStatus sve_fast_em_solve(const struct SveProblem *problem,
                                 const struct SvePath *path,
                                 double eps,
                                 double *out,
                                 size_t capacity);

/**
 * Milstein with the closed-form iterated integral (`β = 0`, scalar noise).
 *
 * # Safety
 * Handles must be live; `out` must point to `capacity` writable doubles.
 */
enum SveStatus sve_milstein_solve(const struct SveProblem *problem,
                                  const struct SvePath *path,
                                  double *out,
                                  size_t capacity);

/**
 * Milstein with stochastic integrals resolved on `fine`, a refinement of
 * `path` whose block sums equal `path`'s increments.
 *
 * # Safety
 * Handles must be live; `out` must point to `capacity` writable doubles.
 */
enum SveStatus sve_milstein_solve_subsampled(const struct SveProblem *problem,
                                             const struct SvePath *path,
                                             const struct SvePath *fine,
                                             double *out,
                                             size_t capacity);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SVE_H */
