#ifndef SSEP_HYDRO_H
#define SSEP_HYDRO_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SsepStatus {
  SSEP_STATUS_OK = 0,
  SSEP_STATUS_NULL_POINTER = 1,
  SSEP_STATUS_INVALID_UTF8 = 2,
  SSEP_STATUS_PARSE_ERROR = 3,
  SSEP_STATUS_INVALID_ARGUMENT = 4,
  SSEP_STATUS_NON_UNIQUE_STATIONARY = 5,
  SSEP_STATUS_UNSUPPORTED = 6,
  SSEP_STATUS_SIZE_LIMIT = 7,
  SSEP_STATUS_BUFFER_TOO_SMALL = 8,
  SSEP_STATUS_INTERNAL = 9,
} SsepStatus;

/**
 * A validated model.
 */
typedef struct SsepModel SsepModel;

/**
 * An initial density profile.
 */
typedef struct SsepProfile SsepProfile;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Parses a model from JSON (keys `N`, `p`, `beta`, `left`).
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum SsepStatus ssep_model_from_json(const char *json, struct SsepModel **out);

/**
 * # Safety
 * `model` must come from `ssep_model_from_json` and not be freed twice.
 */
void ssep_model_free(struct SsepModel *model);

/**
 * Number of lattice sites `N - 1`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum SsepStatus ssep_model_sites(const struct SsepModel *model, size_t *out);

/**
 * Parses a profile from JSON, e.g. `{"kind": "linear", "left": 0.2, "right": 0.8}`.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum SsepStatus ssep_profile_from_json(const char *json, struct SsepProfile **out);

/**
 * # Safety
 * `profile` must come from `ssep_profile_from_json` and not be freed twice.
 */
void ssep_profile_free(struct SsepProfile *profile);

/**
 * Effective density the boundary block imposes on the bulk.
 *
 * # Safety
 * Pointers must be valid.
 */
enum SsepStatus ssep_left_density(const struct SsepModel *model, double *out);

/**
 * Writes the boundary-chain report as NUL-terminated JSON into `buf`.
 *
 * `needed` (if not null) receives the size including the terminator; with
 * `cap` too small the call returns `BUFFER_TOO_SMALL` and writes nothing.
 *
 * # Safety
 * `buf` must hold `cap` bytes (it may be null when `cap` is 0).
 */
enum SsepStatus ssep_boundary_report_json(const struct SsepModel *model,
                                          char *buf,
                                          size_t cap,
                                          size_t *needed);

/**
 * Densities at sites `1..N-1` for each time: `n_times * (N-1)` values.
 *
 * # Safety
 * `times` must hold `n_times` values and `out` `out_len` values.
 */
enum SsepStatus ssep_solve_density(const struct SsepModel *model,
                                   const struct SsepProfile *profile,
                                   const double *times,
                                   size_t n_times,
                                   double *out,
                                   size_t out_len);

/**
 * Pair correlations for each time, ordered `(1,2), (1,3), (2,3), (1,4), ...`
 * (by `l`, then `k`): `n_times * (N-1)(N-2)/2` values.
 *
 * # Safety
 * `times` must hold `n_times` values and `out` `out_len` values.
 */
enum SsepStatus ssep_solve_correlation(const struct SsepModel *model,
                                       const struct SsepProfile *profile,
                                       const double *times,
                                       size_t n_times,
                                       double *out,
                                       size_t out_len);

/**
 * One trajectory: occupations (0 or 1) of sites `1..N-1` at each time.
 *
 * # Safety
 * `times` must hold `n_times` values and `out` `out_len` bytes.
 */
enum SsepStatus ssep_simulate(const struct SsepModel *model,
                              const struct SsepProfile *profile,
                              const double *times,
                              size_t n_times,
                              uint64_t seed,
                              uint8_t *out,
                              size_t out_len);

/**
 * Ensemble mean density and its standard error, replicas seeded
 * `seed_base + i`; each output holds `n_times * (N-1)` values.
 *
 * # Safety
 * `times` must hold `n_times` values, `mean` and `stderr` `out_len` each.
 */
enum SsepStatus ssep_ensemble_density(const struct SsepModel *model,
                                      const struct SsepProfile *profile,
                                      const double *times,
                                      size_t n_times,
                                      size_t replicas,
                                      uint64_t seed_base,
                                      double *mean,
                                      double *stderr,
                                      size_t out_len);

/**
 * Message of the last failure on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *ssep_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ssep_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SSEP_HYDRO_H */
