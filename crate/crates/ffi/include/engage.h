#ifndef ENGAGE_H
#define ENGAGE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum EngageStatus {
  ENGAGE_STATUS_OK = 0,
  ENGAGE_STATUS_NULL_POINTER = 1,
  ENGAGE_STATUS_INVALID_UTF8 = 2,
  ENGAGE_STATUS_CONFIG = 3,
  ENGAGE_STATUS_SOLVER = 4,
  ENGAGE_STATUS_SIMULATION = 5,
  ENGAGE_STATUS_BUFFER_TOO_SMALL = 6,
  ENGAGE_STATUS_PANIC = 7,
} EngageStatus;

/**
 * Parsed and validated run configuration.
 */
typedef struct EngageConfig EngageConfig;

/**
 * Solved thresholds in marginal-cost order.
 */
typedef struct EngageSolution EngageSolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. Valid until the
 * next call into this library on the same thread.
 */
const char *engage_last_error(void);

/**
 * Loads a TOML configuration file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum EngageStatus engage_config_from_file(const char *path, struct EngageConfig **out);

/**
 * Parses TOML configuration text.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be writable.
 */
enum EngageStatus engage_config_from_str(const char *text, struct EngageConfig **out);

/**
 * The built-in food-bank base case.
 *
 * # Safety
 * `out` must be writable.
 */
enum EngageStatus engage_config_base_case(struct EngageConfig **out);

/**
 * # Safety
 * `cfg` must come from an `engage_config_*` constructor and not be used
 * afterwards. NULL is ignored.
 */
void engage_config_free(struct EngageConfig *cfg);

/**
 * Number of engagement activities.
 *
 * # Safety
 * `cfg` must be a live handle; `out` must be writable.
 */
enum EngageStatus engage_config_activity_count(const struct EngageConfig *cfg, size_t *out);

/**
 * Overrides the number of simulation replications.
 *
 * # Safety
 * `cfg` must be a live handle.
 */
enum EngageStatus engage_config_set_replications(struct EngageConfig *cfg, uint32_t replications);

/**
 * Solves for β* and the nested thresholds.
 *
 * # Safety
 * `cfg` must be a live handle; `out` must be writable.
 */
enum EngageStatus engage_solve(const struct EngageConfig *cfg, struct EngageSolution **out);

/**
 * # Safety
 * `sol` must come from [`engage_solve`] and not be used afterwards. NULL is
 * ignored.
 */
void engage_solution_free(struct EngageSolution *sol);

/**
 * # Safety
 * `sol` must be a live handle; `out` must be writable.
 */
enum EngageStatus engage_solution_beta_star(const struct EngageSolution *sol, double *out);

/**
 * Copies workload thresholds τ, queue thresholds q* and the configuration
 * index of each ranked activity into caller buffers of length `capacity`.
 * Any buffer may be NULL to skip it. `len` receives the number of
 * thresholds; if it exceeds `capacity` nothing is copied and
 * `ENGAGE_STATUS_BUFFER_TOO_SMALL` is returned.
 *
 * # Safety
 * Non-null buffers must hold `capacity` elements; `len` must be writable.
 */
enum EngageStatus engage_solution_thresholds(const struct EngageSolution *sol,
                                             double *tau,
                                             double *queue,
                                             size_t *activity,
                                             size_t capacity,
                                             size_t *len);

/**
 * Simulates one policy (`static:1,2,3`, `static:` or `dynamic`) and
 * reports the mean annual total cost and its 95% half-width.
 *
 * # Safety
 * `cfg` must be a live handle, `policy` NUL-terminated, outputs writable.
 */
enum EngageStatus engage_simulate_total_cost(const struct EngageConfig *cfg,
                                             const char *policy,
                                             double *mean,
                                             double *half_width);

/**
 * Library version, NUL-terminated and static.
 */
const char *engage_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ENGAGE_H */
