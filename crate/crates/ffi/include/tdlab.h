#ifndef TDLAB_H
#define TDLAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TdlabStatus {
  TDLAB_STATUS_OK = 0,
  TDLAB_STATUS_NULL_POINTER = 1,
  TDLAB_STATUS_INVALID_ARGUMENT = 2,
  TDLAB_STATUS_PARSE = 3,
  TDLAB_STATUS_SIZE_MISMATCH = 4,
  TDLAB_STATUS_SINGULAR = 5,
  TDLAB_STATUS_UNSUPPORTED = 6,
  TDLAB_STATUS_IO = 7,
  TDLAB_STATUS_PANIC = 8,
} TdlabStatus;

typedef enum TdlabVerdict {
  TDLAB_VERDICT_CONVERGED = 0,
  TDLAB_VERDICT_DIVERGED = 1,
  TDLAB_VERDICT_EXHAUSTED = 2,
} TdlabVerdict;

/**
 * Opaque Markov reward process.
 */
typedef struct TdlabMrp TdlabMrp;

/**
 * Opaque return specification.
 */
typedef struct TdlabSpec TdlabSpec;

typedef struct TdlabClassification {
  bool is_linear;
  bool is_affine;
  bool is_convex;
  bool is_compound;
  bool is_nstep;
  bool weak_recency;
  bool strong_recency;
  double weight_sum;
  double modulus;
} TdlabClassification;

typedef struct TdlabIterateResult {
  enum TdlabVerdict verdict;
  /**
   * Updates performed.
   */
  size_t iterations;
  /**
   * Max-norm distance to the fixed point after the last update.
   */
  double final_distance;
  /**
   * Ratio of the last two distances, or NaN with fewer than two.
   */
  double last_growth_ratio;
} TdlabIterateResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *tdlab_version(void);

/**
 * Message of the last failing call on this thread; empty if none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *tdlab_last_error(void);

/**
 * Random walk with `n` non-terminal states and terminals at both ends.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum TdlabStatus tdlab_mrp_random_walk(size_t n, double gamma, struct TdlabMrp **out);

/**
 * Two-state MRP that stays put with probability `p`, with zero rewards.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum TdlabStatus tdlab_mrp_two_state(double p, double gamma, struct TdlabMrp **out);

/**
 * Parses an MRP from its text format.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` valid for writes.
 */
enum TdlabStatus tdlab_mrp_from_text(const char *text, struct TdlabMrp **out);

/**
 * # Safety
 * `mrp` must come from a `tdlab_mrp_*` constructor and not be used after.
 */
void tdlab_mrp_free(struct TdlabMrp *mrp);

/**
 * Number of states, terminals included; 0 for a null handle.
 *
 * # Safety
 * `mrp` must be null or a live handle.
 */
size_t tdlab_mrp_n_states(const struct TdlabMrp *mrp);

/**
 * Writes the exact state values into `out[0..len]`; `len` must equal
 * the number of states.
 *
 * # Safety
 * `mrp` must be a live handle and `out` valid for `len` writes.
 */
enum TdlabStatus tdlab_mrp_exact_values(const struct TdlabMrp *mrp, double *out, size_t len);

/**
 * Parses a specification such as `lambda:0.9` or `sparse:0.75:3`.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` valid for writes.
 */
enum TdlabStatus tdlab_spec_parse(const char *text, struct TdlabSpec **out);

/**
 * # Safety
 * `spec` must come from `tdlab_spec_parse` and not be used after.
 */
void tdlab_spec_free(struct TdlabSpec *spec);

/**
 * Places the estimator in the hierarchy at discount `gamma`.
 *
 * # Safety
 * `spec` must be a live handle and `out` valid for writes.
 */
enum TdlabStatus tdlab_spec_classify(const struct TdlabSpec *spec,
                                     double gamma,
                                     double eps,
                                     struct TdlabClassification *out);

/**
 * Worst-case contraction modulus at discount `gamma`.
 *
 * # Safety
 * `spec` must be a live handle and `out` valid for writes.
 */
enum TdlabStatus tdlab_spec_modulus(const struct TdlabSpec *spec, double gamma, double *out);

/**
 * Applies the expected-update operator of `spec` on `mrp` to `v`.
 *
 * # Safety
 * `v` and `out` must be valid for `len` reads and writes respectively.
 */
enum TdlabStatus tdlab_apply_operator(const struct TdlabMrp *mrp,
                                      const struct TdlabSpec *spec,
                                      const double *v,
                                      double *out,
                                      size_t len);

/**
 * Iterates `v ← v + step (H v - v)` from `v0` until convergence to
 * `1e-10`, divergence past `1e6` or `max_iters` updates.
 *
 * # Safety
 * `v0` must be valid for `len` reads and `out` for writes.
 */
enum TdlabStatus tdlab_iterate(const struct TdlabMrp *mrp,
                               const struct TdlabSpec *spec,
                               const double *v0,
                               size_t len,
                               double step,
                               size_t max_iters,
                               struct TdlabIterateResult *out);

/**
 * `((1 - modulus) / (1 - gamma))² kappa`.
 */
double tdlab_variance_bound(double modulus, double gamma, double kappa);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TDLAB_H */
