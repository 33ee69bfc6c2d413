#ifndef RBB_H
#define RBB_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Cover-time marker for a ball still uncovered at the cap.
 */
#define RBB_UNCOVERED UINT64_MAX

typedef enum RbbStatus {
  RBB_STATUS_OK = 0,
  RBB_STATUS_NULL_POINTER = 1,
  RBB_STATUS_INVALID_ARGUMENT = 2,
  RBB_STATUS_PRECONDITION = 3,
  RBB_STATUS_CAP_EXCEEDED = 4,
  RBB_STATUS_OVERFLOW = 5,
  RBB_STATUS_NON_CONVERGENCE = 6,
  RBB_STATUS_UNKNOWN_CHECK = 7,
  RBB_STATUS_BUFFER_TOO_SMALL = 8,
  RBB_STATUS_IO = 9,
  RBB_STATUS_PANIC = 10,
} RbbStatus;

typedef enum RbbInit {
  RBB_INIT_UNIFORM = 0,
  RBB_INIT_SINGLE_BIN = 1,
} RbbInit;

typedef enum RbbProcess {
  RBB_PROCESS_RBB = 0,
  RBB_PROCESS_IDEALIZED = 1,
} RbbProcess;

typedef enum RbbTieBreak {
  RBB_TIE_BREAK_BALL_ID = 0,
  RBB_TIE_BREAK_RANDOM = 1,
} RbbTieBreak;

/**
 * Opaque simulation handle.
 */
typedef struct RbbSim RbbSim;

/**
 * Snapshot of the observables at the current round.
 */
typedef struct RbbObservation {
  uint64_t round;
  uint64_t empty;
  uint64_t nonempty;
  double empty_fraction;
  /**
   * Sum of squared loads, split into 64-bit halves (exact).
   */
  uint64_t quadratic_lo;
  uint64_t quadratic_hi;
  /**
   * Natural log of the exponential potential at the requested alpha.
   */
  double log_phi;
  uint64_t max_load;
} RbbObservation;

/**
 * Outcome of a named check; several sub-statements are folded together.
 */
typedef struct RbbCheckResult {
  bool passed;
  /**
   * Statistic and threshold of the first failing report, or of the first
   * report when all pass.
   */
  double statistic;
  double threshold;
  uint32_t reports;
} RbbCheckResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *rbb_version(void);

/**
 * Message of the last failure on this thread, or NULL. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *rbb_last_error_message(void);

/**
 * Creates a simulation of `m` balls in `n` bins.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum RbbStatus rbb_sim_new(size_t n,
                           uint64_t m,
                           enum RbbInit init,
                           enum RbbProcess process,
                           uint64_t seed,
                           uint64_t stream,
                           struct RbbSim **out);

/**
 * Creates a simulation from `n` explicit loads.
 *
 * # Safety
 * `loads` must point to `n` readable values and `out` to writable storage
 * for one handle.
 */
enum RbbStatus rbb_sim_new_from_loads(const uint64_t *loads,
                                      size_t n,
                                      enum RbbProcess process,
                                      uint64_t seed,
                                      uint64_t stream,
                                      struct RbbSim **out);

/**
 * Releases a handle; NULL is ignored.
 *
 * # Safety
 * `sim` must come from `rbb_sim_new*` and not have been freed already.
 */
void rbb_sim_free(struct RbbSim *sim);

/**
 * Advances the simulation by `rounds` rounds.
 *
 * # Safety
 * `sim` must be a live handle.
 */
enum RbbStatus rbb_sim_step(struct RbbSim *sim, uint64_t rounds);

/**
 * Number of bins, or 0 for a NULL handle.
 *
 * # Safety
 * `sim` must be a live handle or NULL.
 */
size_t rbb_sim_bins(const struct RbbSim *sim);

/**
 * Copies the current loads into `buf`, which must hold at least as many
 * entries as there are bins.
 *
 * # Safety
 * `sim` must be a live handle and `buf` must point to `len` writable values.
 */
enum RbbStatus rbb_sim_loads(const struct RbbSim *sim, uint64_t *buf, size_t len);

/**
 * Fills `out` with the observables of the current round; `alpha` sets the
 * exponential potential's smoothing parameter.
 *
 * # Safety
 * `sim` must be a live handle and `out` must be writable.
 */
enum RbbStatus rbb_sim_observe(const struct RbbSim *sim, double alpha, struct RbbObservation *out);

/**
 * Runs the FIFO traversal until every ball has visited every bin or `cap`
 * rounds pass. Writes one cover round per ball (ascending ball id, balls
 * numbered in ascending bin order) into `out`, with [`RBB_UNCOVERED`] for
 * balls still uncovered at the cap.
 *
 * # Safety
 * `out` must point to `len >= m` writable values; `covered` may be NULL.
 */
enum RbbStatus rbb_cover_times(size_t n,
                               uint64_t m,
                               enum RbbInit init,
                               enum RbbTieBreak tie,
                               uint64_t cap,
                               uint64_t seed,
                               uint64_t stream,
                               uint64_t *out,
                               size_t len,
                               uint64_t *covered);

/**
 * Runs a named validation check with the given master seed.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` writable.
 */
enum RbbStatus rbb_run_check(const char *name, uint64_t seed, struct RbbCheckResult *out);

/**
 * Exact stationary law of the chain on `n` bins and `m` balls, restricted
 * to the class reached from the uniform configuration. States are listed in
 * colexicographic order; `probs` receives one probability per state and
 * `states`, when non-NULL, `n` loads per state. `count` always receives the
 * number of states, so a call with `len = 0` sizes the buffers.
 *
 * # Safety
 * `probs` must hold `len` values and `states` (if non-NULL) `len * n`;
 * `count` must be writable.
 */
enum RbbStatus rbb_oracle_stationary(size_t n,
                                     uint64_t m,
                                     double *probs,
                                     uint64_t *states,
                                     size_t len,
                                     size_t *count);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RBB_H */
