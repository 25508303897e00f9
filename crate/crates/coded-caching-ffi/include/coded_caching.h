#ifndef CODED_CACHING_H
#define CODED_CACHING_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every FFI entry point.
 */
enum CcStatus
#if defined(__cplusplus) || __STDC_VERSION__ >= 202311L
  : int32_t
#endif // defined(__cplusplus) || __STDC_VERSION__ >= 202311L
 {
  CC_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  CC_STATUS_NULL_POINTER = 1,
  /**
   * Malformed input: bad config, bad UTF-8, wrong buffer length, or an
   * action outside the feasible lattice.
   */
  CC_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Structurally valid input describing an infeasible scenario
   * (cache budget exceeds what the level cap allows).
   */
  CC_STATUS_INFEASIBLE = 3,
  /**
   * Operation requires a reset environment or a hidden model.
   */
  CC_STATUS_INVALID_STATE = 4,
  /**
   * Config file could not be read.
   */
  CC_STATUS_IO = 5,
};
#ifndef __cplusplus
#if __STDC_VERSION__ >= 202311L
typedef enum CcStatus CcStatus;
#else
typedef int32_t CcStatus;
#endif // __STDC_VERSION__ >= 202311L
#endif // __cplusplus

/**
 * Opaque simulation environment plus its most recent observation.
 */
typedef struct CcEnv CcEnv;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * # Safety
 * `path` must be a valid NUL-terminated string; `out` must be valid for
 * writes. On success `*out` owns the environment and must be released
 * with [`cc_env_free`].
 */
CcStatus cc_env_new(const char *path, CcEnv **out);

/**
 * Releases an environment created by [`cc_env_new`]. Accepts null.
 *
 * # Safety
 * `env` must be a pointer previously returned by [`cc_env_new`] and not
 * already freed.
 */
void cc_env_free(CcEnv *env);

/**
 * Number of contents in the catalog.
 *
 * # Safety
 * `env` and `out` must be valid pointers.
 */
CcStatus cc_env_n_contents(const CcEnv *env, uintptr_t *out);

/**
 * Reseeds and restarts the episode.
 *
 * # Safety
 * `env` must be a valid pointer.
 */
CcStatus cc_env_reset(CcEnv *env, uint64_t seed);

/**
 * Applies a caching decision given as per-content levels (`len` must equal
 * the catalog size) and writes the slot reward.
 *
 * # Safety
 * `env` must be valid; `levels` must point to `len` readable values;
 * `reward` must be valid for writes.
 */
CcStatus cc_env_step(CcEnv *env, const uint32_t *levels, uintptr_t len, double *reward);

/**
 * Copies the current popularity profile into `buf` (`len` must equal the
 * catalog size). Requires a prior reset.
 *
 * # Safety
 * `env` must be valid; `buf` must be valid for `len` writes.
 */
CcStatus cc_env_theta(const CcEnv *env, double *buf, uintptr_t len);

/**
 * Copies the most recent per-content request counts into `buf`.
 * Requires a prior reset.
 *
 * # Safety
 * `env` must be valid; `buf` must be valid for `len` writes.
 */
CcStatus cc_env_counts(const CcEnv *env, uint64_t *buf, uintptr_t len);

/**
 * Number of feasible caching decisions on the fractional level lattice
 * for the given system shape; see the config documentation for the
 * parameter roles.
 *
 * # Safety
 * `out` must be valid for writes.
 */
CcStatus cc_action_space_len(uint32_t price,
                             uintptr_t n_contents,
                             uint32_t k_stations,
                             uint32_t d_cooperation,
                             uint32_t l_fragments,
                             uint64_t *out);

/**
 * Slot reward for given request counts, current and previous levels, under
 * the standard pricing: direct traffic minus update cost minus uncovered
 * complementary traffic.
 *
 * # Safety
 * `counts`, `levels_now`, `levels_prev` must each point to `n_contents`
 * readable values; `out` must be valid for writes.
 */
CcStatus cc_compute_reward(uint32_t price,
                           uintptr_t n_contents,
                           uint32_t k_stations,
                           uint32_t d_cooperation,
                           uint32_t l_fragments,
                           const uint64_t *counts,
                           const uint32_t *levels_now,
                           const uint32_t *levels_prev,
                           double *out);

/**
 * Writes the normalized Zipf popularity profile with skewness `alpha` into
 * `buf` (`len` entries, most popular first).
 *
 * # Safety
 * `buf` must be valid for `len` writes.
 */
CcStatus cc_zipf_profile(uintptr_t len, double alpha, double *buf);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CODED_CACHING_H */
