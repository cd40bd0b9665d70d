#ifndef CSA_H
#define CSA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CsaStatus {
  CSA_STATUS_OK = 0,
  CSA_STATUS_NULL_POINTER = 1,
  CSA_STATUS_INVALID_ARGUMENT = 2,
  CSA_STATUS_UTF8 = 3,
  CSA_STATUS_PANIC = 4,
} CsaStatus;

// Degree distribution handle.
typedef struct CsaDistribution CsaDistribution;

// Contention graph handle.
typedef struct CsaGraph CsaGraph;

// Decoding result handle.
typedef struct CsaTrace CsaTrace;

// One load point of a sweep.
typedef struct CsaSweepRow {
  double load;
  uintptr_t trials;
  double throughput;
  double throughput_ci95;
  double plr;
  double plr_ci95;
  double mean_iters;
  double mean_delay;
} CsaSweepRow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the last failed call on this thread; empty after a
// success. Valid until the next call on this thread.
const char *csa_last_error(void);

// Library version, a static string.
const char *csa_version(void);

// Parses a distribution such as `"2:0.5,3:0.5"`.
//
// # Safety
// `text` must be a NUL-terminated string and `out` writable.
enum CsaStatus csa_distribution_parse(const char *text, struct CsaDistribution **out);

// # Safety
// `dist` must come from [`csa_distribution_parse`] and not be freed yet; null is ignored.
void csa_distribution_free(struct CsaDistribution *dist);

// # Safety
// `dist` must be a live handle and `out` writable.
enum CsaStatus csa_distribution_mean_degree(const struct CsaDistribution *dist, double *out);

// # Safety
// `dist` must be a live handle and `out` writable.
enum CsaStatus csa_distribution_rate(const struct CsaDistribution *dist, double *out);

// Density-evolution threshold, bisected to `tol`.
//
// # Safety
// `dist` must be a live handle and `out` writable.
enum CsaStatus csa_threshold(const struct CsaDistribution *dist, double tol, double *out);

// Threshold upper bound at rate `rate` in (0, 1).
//
// # Safety
// `out` must be writable.
enum CsaStatus csa_bound_root(double rate, double *out);

// Builds a graph from user placements in compressed form: the slots of
// user `u` are `slots[offsets[u] .. offsets[u + 1]]`, with
// `offsets` holding `num_users + 1` entries.
//
// # Safety
// `offsets` must hold `num_users + 1` values and `slots` at least
// `offsets[num_users]`; `out` must be writable.
enum CsaStatus csa_graph_new(uintptr_t num_slots,
                             uintptr_t num_users,
                             const uintptr_t *offsets,
                             const uintptr_t *slots,
                             struct CsaGraph **out);

// Random graph of `num_users` users drawing degrees from `dist`.
//
// # Safety
// `dist` must be a live handle and `out` writable.
enum CsaStatus csa_graph_random(uintptr_t num_users,
                                uintptr_t num_slots,
                                const struct CsaDistribution *dist,
                                uint64_t seed,
                                struct CsaGraph **out);

// # Safety
// `graph` must be a live handle or null.
void csa_graph_free(struct CsaGraph *graph);

// # Safety
// `graph` must be a live handle; `users` and `slots` writable or null.
enum CsaStatus csa_graph_size(const struct CsaGraph *graph, uintptr_t *users, uintptr_t *slots);

// Iterative interference cancellation to fixpoint.
//
// # Safety
// `graph` must be a live handle and `out` writable.
enum CsaStatus csa_peel(const struct CsaGraph *graph, struct CsaTrace **out);

// Singleton-only decoding.
//
// # Safety
// `graph` must be a live handle and `out` writable.
enum CsaStatus csa_decode_without_sic(const struct CsaGraph *graph, struct CsaTrace **out);

// # Safety
// `trace` must be a live handle or null.
void csa_trace_free(struct CsaTrace *trace);

// Resolved user count and number of productive rounds.
//
// # Safety
// `trace` must be a live handle; `resolved` and `iterations` writable or null.
enum CsaStatus csa_trace_summary(const struct CsaTrace *trace,
                                 uintptr_t *resolved,
                                 uintptr_t *iterations);

// Slot whose replica resolved `user`, or -1 when it stayed unresolved.
//
// # Safety
// `trace` must be a live handle and `out` writable.
enum CsaStatus csa_trace_recovery_slot(const struct CsaTrace *trace, uintptr_t user, int64_t *out);

// Monte Carlo sweep of repetition CSA over `num_loads` load points,
// writing one row per point into `rows`.
//
// # Safety
// `dist` must be a live handle, `loads` must hold `num_loads` values and
// `rows` room for `num_loads` rows.
enum CsaStatus csa_sweep(const struct CsaDistribution *dist,
                         uintptr_t num_slots,
                         const double *loads,
                         uintptr_t num_loads,
                         uintptr_t trials,
                         uint64_t seed,
                         struct CsaSweepRow *rows);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CSA_H */
