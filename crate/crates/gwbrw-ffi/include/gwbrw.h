/* C interface of the gwbrw simulation library. */

#pragma once

/* Generated with cbindgen:0.29.4 */

/* Generated by cbindgen from crates/gwbrw-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Outcome of a fallible call. Anything other than `Ok` leaves the
 * out-parameters untouched and records a message for
 * [`gwbrw_last_error_message`].
 */
typedef enum GwbrwStatus {
  GWBRW_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  GWBRW_STATUS_NULL_ARGUMENT = 1,
  /**
   * An argument was out of range or structurally invalid.
   */
  GWBRW_STATUS_INVALID_ARGUMENT = 2,
  /**
   * A string argument was not valid UTF-8.
   */
  GWBRW_STATUS_INVALID_UTF8 = 3,
  /**
   * Conditioned sampling gave up (see the error message for the budget).
   */
  GWBRW_STATUS_SAMPLING = 4,
  /**
   * The experiment configuration was rejected.
   */
  GWBRW_STATUS_CONFIG = 5,
  /**
   * An experiment failed at runtime.
   */
  GWBRW_STATUS_RUNTIME = 6,
  /**
   * A panic was caught at the boundary; the involved handles are still
   * valid but the call had no effect.
   */
  GWBRW_STATUS_PANIC = 7,
} GwbrwStatus;

/**
 * Serialization format selector for [`gwbrw_report_render`].
 */
typedef enum GwbrwFormat {
  GWBRW_FORMAT_CSV = 0,
  GWBRW_FORMAT_NDJSON = 1,
} GwbrwFormat;

/**
 * Offspring distribution handle.
 */
typedef struct GwbrwDistribution GwbrwDistribution;

/**
 * Finished experiment run: the report plus the metadata stamped on
 * serialized artifacts.
 */
typedef struct GwbrwReport GwbrwReport;

/**
 * Ordered rooted tree handle.
 */
typedef struct GwbrwTree GwbrwTree;

/**
 * Branching random walk labels over one tree.
 */
typedef struct GwbrwWalk GwbrwWalk;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Version of the underlying library, a static string; do not free.
 */
const char *gwbrw_version(void);

/**
 * Message of the most recent failing call on this thread, empty if none.
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *gwbrw_last_error_message(void);

/**
 * Frees a string returned by this library. Null is a no-op.
 *
 * # Safety
 * `s` must come from a `gwbrw_*` call documented to transfer ownership,
 * and must not be used afterwards.
 */
void gwbrw_string_free(char *s);

/**
 * Geometric(1/2) offspring law (mean one, variance two).
 */
struct GwbrwDistribution *gwbrw_distribution_geometric(void);

/**
 * Poisson(1) offspring law.
 */
struct GwbrwDistribution *gwbrw_distribution_poisson(void);

/**
 * Heavy-tailed critical law with generating function s + (1-s)^gamma / gamma,
 * gamma in (1, 2].
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum GwbrwStatus gwbrw_distribution_stable(double gamma, struct GwbrwDistribution **out);

/**
 * Finite-support offspring law given by `pmf[0..len]`; entries must be
 * nonnegative, sum to one, and have mean one.
 *
 * # Safety
 * `pmf` must point to `len` readable doubles and `out` must be valid.
 */
enum GwbrwStatus gwbrw_distribution_table(const double *pmf,
                                          size_t len,
                                          struct GwbrwDistribution **out);

/**
 * Mean of the law; NaN on a null handle.
 *
 * # Safety
 * `d` must be a live distribution handle or null.
 */
double gwbrw_distribution_mean(const struct GwbrwDistribution *d);

/**
 * Variance of the law; +inf for the heavy-tailed family, NaN on a null
 * handle.
 *
 * # Safety
 * `d` must be a live distribution handle or null.
 */
double gwbrw_distribution_variance(const struct GwbrwDistribution *d);

/**
 * Short human-readable label; free with `gwbrw_string_free`.
 *
 * # Safety
 * `d` must be a live distribution handle or null.
 */
char *gwbrw_distribution_label(const struct GwbrwDistribution *d);

/**
 * Height scaling sequence a_n for trees conditioned to n vertices; NaN on a
 * null handle.
 *
 * # Safety
 * `d` must be a live distribution handle or null.
 */
double gwbrw_scaling_a_n(const struct GwbrwDistribution *d, size_t n);

/**
 * # Safety
 * `d` must come from a `gwbrw_distribution_*` constructor; null is a no-op.
 */
void gwbrw_distribution_free(struct GwbrwDistribution *d);

/**
 * Samples a critical Galton-Watson tree conditioned to exactly `n`
 * vertices, giving up after `max_tries` rejection rounds (0 picks a default
 * of 100000).
 *
 * # Safety
 * `d` must be a live distribution handle and `out` a valid pointer.
 */
enum GwbrwStatus gwbrw_tree_sample(const struct GwbrwDistribution *d,
                                   size_t n,
                                   uint64_t seed,
                                   uint64_t max_tries,
                                   struct GwbrwTree **out);

/**
 * Builds a tree from its depth-first offspring sequence.
 *
 * # Safety
 * `counts` must point to `len` readable u32 values and `out` must be valid.
 */
enum GwbrwStatus gwbrw_tree_from_offspring(const uint32_t *counts,
                                           size_t len,
                                           struct GwbrwTree **out);

/**
 * Parses the line format produced by `gwbrw_tree_to_line`.
 *
 * # Safety
 * `line` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum GwbrwStatus gwbrw_tree_from_line(const char *line, struct GwbrwTree **out);

/**
 * Number of vertices; 0 on a null handle.
 *
 * # Safety
 * `t` must be a live tree handle or null.
 */
size_t gwbrw_tree_len(const struct GwbrwTree *t);

/**
 * Copies the depth-first offspring sequence into `buf`.
 *
 * # Safety
 * `t` must be a live tree handle and `buf` must hold `cap >= len` u32s.
 */
enum GwbrwStatus gwbrw_tree_offspring(const struct GwbrwTree *t, uint32_t *buf, size_t cap);

/**
 * Copies the vertex depths (root 0) in depth-first order into `buf`.
 *
 * # Safety
 * `t` must be a live tree handle and `buf` must hold `cap >= len` u32s.
 */
enum GwbrwStatus gwbrw_tree_depths(const struct GwbrwTree *t, uint32_t *buf, size_t cap);

/**
 * One-line text encoding of the tree; free with `gwbrw_string_free`.
 *
 * # Safety
 * `t` must be a live tree handle or null.
 */
char *gwbrw_tree_to_line(const struct GwbrwTree *t);

/**
 * # Safety
 * `t` must come from a tree constructor; null is a no-op.
 */
void gwbrw_tree_free(struct GwbrwTree *t);

/**
 * Samples branching random walk labels over the tree: each edge steps +-1
 * with equal probability, and the reflected variant forces +1 out of level
 * zero. The tree handle stays owned by the caller.
 *
 * # Safety
 * `t` must be a live tree handle and `out` a valid pointer.
 */
enum GwbrwStatus gwbrw_walk_sample(const struct GwbrwTree *t,
                                   bool reflected,
                                   uint64_t seed,
                                   struct GwbrwWalk **out);

/**
 * Number of labels (= vertices); 0 on a null handle.
 *
 * # Safety
 * `w` must be a live walk handle or null.
 */
size_t gwbrw_walk_len(const struct GwbrwWalk *w);

/**
 * Whether the walk was sampled with reflection at zero.
 *
 * # Safety
 * `w` must be a live walk handle or null.
 */
bool gwbrw_walk_reflected(const struct GwbrwWalk *w);

/**
 * Copies the labels in depth-first vertex order into `buf`.
 *
 * # Safety
 * `w` must be a live walk handle and `buf` must hold `cap >= len` i64s.
 */
enum GwbrwStatus gwbrw_walk_heights(const struct GwbrwWalk *w, int64_t *buf, size_t cap);

/**
 * # Safety
 * `w` must come from `gwbrw_walk_sample`; null is a no-op.
 */
void gwbrw_walk_free(struct GwbrwWalk *w);

/**
 * Estimates the range-density constant c by the law-of-large-numbers route:
 * mean range size over n of the b-ary walk on conditioned trees of n
 * vertices. Writes the point estimate and its standard error.
 *
 * # Safety
 * `d` must be a live distribution handle; `out_c_hat` and `out_stderr`
 * must be valid pointers.
 */
enum GwbrwStatus gwbrw_estimate_c_lln(const struct GwbrwDistribution *d,
                                      uint32_t b,
                                      size_t n,
                                      uint64_t replicates,
                                      uint64_t seed,
                                      double *out_c_hat,
                                      double *out_stderr);

/**
 * Runs one experiment to completion. `name` is one of the CLI experiment
 * names ("exact-checks", "lln", "estimate-c", "convergence", "marginal-ks",
 * "coupling-check", "scc-invariance", "snake-demo"); `config_json` is an
 * optional configuration document (null or empty means defaults), with
 * missing fields filled per experiment; `seed` overrides the configured
 * master seed when `override_seed` is true. Replicates run on the global
 * worker pool; results do not depend on its size.
 *
 * # Safety
 * `name` must be a valid NUL-terminated string, `config_json` likewise or
 * null, and `out` a valid pointer.
 */
enum GwbrwStatus gwbrw_experiment_run(const char *name,
                                      const char *config_json,
                                      bool override_seed,
                                      uint64_t seed,
                                      struct GwbrwReport **out);

/**
 * Whether every asserted row passed; false on a null handle.
 *
 * # Safety
 * `r` must be a live report handle or null.
 */
bool gwbrw_report_all_pass(const struct GwbrwReport *r);

/**
 * Number of report rows; 0 on a null handle.
 *
 * # Safety
 * `r` must be a live report handle or null.
 */
size_t gwbrw_report_row_count(const struct GwbrwReport *r);

/**
 * Statistic name of row `i`; free with `gwbrw_string_free`. Null when `i`
 * is out of range.
 *
 * # Safety
 * `r` must be a live report handle or null.
 */
char *gwbrw_report_row_statistic(const struct GwbrwReport *r, size_t i);

/**
 * Numeric value of row `i`.
 *
 * # Safety
 * `r` must be a live report handle and `out` a valid pointer.
 */
enum GwbrwStatus gwbrw_report_row_value(const struct GwbrwReport *r, size_t i, double *out);

/**
 * Pass state of row `i`: 1 passed, 0 failed, -1 informational.
 *
 * # Safety
 * `r` must be a live report handle and `out` a valid pointer.
 */
enum GwbrwStatus gwbrw_report_row_passed(const struct GwbrwReport *r, size_t i, int32_t *out);

/**
 * Serializes the full run artifact (identical to the CLI output for the
 * same config and seed); free with `gwbrw_string_free`.
 *
 * # Safety
 * `r` must be a live report handle or null.
 */
char *gwbrw_report_render(const struct GwbrwReport *r, enum GwbrwFormat format);

/**
 * # Safety
 * `r` must come from `gwbrw_experiment_run`; null is a no-op.
 */
void gwbrw_report_free(struct GwbrwReport *r);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus
