#ifndef AIRCOMP_H
#define AIRCOMP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum AircompStatus {
  AIRCOMP_STATUS_OK = 0,
  AIRCOMP_STATUS_NULL_POINTER = 1,
  AIRCOMP_STATUS_INVALID_UTF8 = 2,
  AIRCOMP_STATUS_INVALID_ARGUMENT = 3,
  AIRCOMP_STATUS_IO = 4,
  AIRCOMP_STATUS_PARSE = 5,
  AIRCOMP_STATUS_INVALID_SCENARIO = 6,
  AIRCOMP_STATUS_SOLVE_FAILED = 7,
  AIRCOMP_STATUS_NO_PLAN = 8,
  AIRCOMP_STATUS_PANIC = 99,
} AircompStatus;

typedef enum AircompLayout {
  // Three clusters of five devices.
  AIRCOMP_LAYOUT_DESK = 0,
  // Six clusters of twenty devices.
  AIRCOMP_LAYOUT_PAPER = 1,
} AircompLayout;

typedef enum AircompScheme {
  AIRCOMP_SCHEME_JOINT = 0,
  AIRCOMP_SCHEME_STATIC_UAV = 1,
  AIRCOMP_SCHEME_EQUAL_POWER = 2,
  AIRCOMP_SCHEME_ORTHOGONAL = 3,
  AIRCOMP_SCHEME_UPPER_BOUND = 4,
} AircompScheme;

typedef struct AircompOutcome AircompOutcome;

typedef struct AircompScenario AircompScenario;

// Inner-loop settings; obtain defaults from [`aircomp_options_default`].
typedef struct AircompOptions {
  size_t max_iters;
  double tol;
} AircompOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL. The pointer is
// valid until the next call into this library from the same thread.
const char *aircomp_last_error(void);

// Releases a string returned by this library. NULL is ignored.
//
// # Safety
// `s` must come from this library and not have been freed.
void aircomp_string_free(char *s);

struct AircompOptions aircomp_options_default(void);

// Parses and validates a scenario document.
//
// # Safety
// `json` must be a NUL-terminated string and `out` writable.
enum AircompStatus aircomp_scenario_from_json(const char *json, struct AircompScenario **out);

// Reads a scenario file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` writable.
enum AircompStatus aircomp_scenario_load(const char *path, struct AircompScenario **out);

// Generates a clustered scenario with devices drawn from `seed`.
//
// # Safety
// `out` must be writable.
enum AircompStatus aircomp_scenario_generate(enum AircompLayout layout,
                                             double duration,
                                             size_t num_uavs,
                                             double power_budget,
                                             uint64_t seed,
                                             struct AircompScenario **out);

// # Safety
// `scenario` must be a live handle and `out` writable.
enum AircompStatus aircomp_scenario_to_json(const struct AircompScenario *scenario, char **out);

// Largest task count any scheme can reach on this scenario.
//
// # Safety
// `scenario` must be a live handle and `out` writable.
enum AircompStatus aircomp_scenario_upper_bound(const struct AircompScenario *scenario,
                                                size_t *out);

// # Safety
// `scenario` must come from this library and not have been freed. NULL is
// ignored.
void aircomp_scenario_free(struct AircompScenario *scenario);

// Runs a scheme to completion. `options` may be NULL for defaults.
//
// # Safety
// `scenario` must be a live handle, `options` NULL or readable, `out`
// writable.
enum AircompStatus aircomp_solve(const struct AircompScenario *scenario,
                                 enum AircompScheme scheme,
                                 const struct AircompOptions *options,
                                 struct AircompOutcome **out);

// Returns the achieved task count, or 0 for a NULL handle.
//
// # Safety
// `outcome` must be NULL or a live handle.
size_t aircomp_outcome_d_star(const struct AircompOutcome *outcome);

// # Safety
// `outcome` must be NULL or a live handle.
size_t aircomp_outcome_upper_bound(const struct AircompOutcome *outcome);

// Worst MSE-to-target ratio of the returned plan; NaN when the scheme
// produces no plan.
//
// # Safety
// `outcome` must be NULL or a live handle.
double aircomp_outcome_gamma(const struct AircompOutcome *outcome);

// Serializes the full outcome, plan included.
//
// # Safety
// `outcome` must be a live handle and `out` writable.
enum AircompStatus aircomp_outcome_to_json(const struct AircompOutcome *outcome, char **out);

// Checks the plan against every constraint. `feasible` receives 1 or 0;
// `worst_ratio` (optional) receives the largest MSE-to-target ratio.
//
// # Safety
// `outcome` must be a live handle, `feasible` writable, `worst_ratio` NULL
// or writable.
enum AircompStatus aircomp_outcome_verify(const struct AircompOutcome *outcome,
                                          int32_t *feasible,
                                          double *worst_ratio);

// # Safety
// `outcome` must come from this library and not have been freed. NULL is
// ignored.
void aircomp_outcome_free(struct AircompOutcome *outcome);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AIRCOMP_H */
