#ifndef SORTCYCLE_H
#define SORTCYCLE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SortcycleStatus {
  SORTCYCLE_STATUS_OK = 0,
  SORTCYCLE_STATUS_NULL_POINTER = 1,
  SORTCYCLE_STATUS_INVALID_ARGUMENT = 2,
  SORTCYCLE_STATUS_DOMAIN = 3,
  SORTCYCLE_STATUS_NO_ROOT = 4,
  SORTCYCLE_STATUS_UNBOUNDED_CAPITAL_DEMAND = 5,
  SORTCYCLE_STATUS_NON_FINITE = 6,
  SORTCYCLE_STATUS_BRACKET_FAILURE = 7,
  SORTCYCLE_STATUS_NO_CONVERGENCE = 8,
  SORTCYCLE_STATUS_GRID_EXIT = 9,
  SORTCYCLE_STATUS_INVALID_PROCESS = 10,
  SORTCYCLE_STATUS_EMPTY_PANEL = 11,
  SORTCYCLE_STATUS_PANIC = 12,
} SortcycleStatus;

/*
 A solved static equilibrium.
 */
typedef struct SortcycleEquilibrium SortcycleEquilibrium;

/*
 Validated structural parameters and a two-state z chain.
 */
typedef struct SortcycleParams SortcycleParams;

/*
 A solved consumption-savings policy.
 */
typedef struct SortcyclePolicy SortcyclePolicy;

/*
 Cross-sectional variances of log wages, log TFPQ and log TFPR.
 */
typedef struct SortcycleDispersion {
  double var_log_wage;
  double var_log_tfpq;
  double var_log_tfpr;
} SortcycleDispersion;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread, or null. The pointer
 stays valid until the next call into the library on this thread.
 */
const char *sortcycle_last_error(void);

/*
 Frees a string returned by the library. Null is ignored.

 # Safety
 `s` must come from this library and not have been freed.
 */
void sortcycle_string_free(char *s);

/*
 Built-in calibration with its z chain.

 # Safety
 `out` must be valid for writes.
 */
enum SortcycleStatus sortcycle_params_default(struct SortcycleParams **out);

/*
 Parameters from a JSON document in the parameter-file format; the
 built-in chain is used when the document has none.

 # Safety
 `json_text` must be a nul-terminated string; `out` valid for writes.
 */
enum SortcycleStatus sortcycle_params_from_json(const char *json_text,
                                                struct SortcycleParams **out);

/*
 Parameters as a JSON document in the parameter-file format.

 # Safety
 `params` must be a live handle; `out` valid for writes.
 */
enum SortcycleStatus sortcycle_params_to_json(const struct SortcycleParams *params, char **out);

/*
 # Safety
 `params` must be null or a live handle from this library.
 */
void sortcycle_params_free(struct SortcycleParams *params);

/*
 Job-distribution rate at market-efficiency level `z`.

 # Safety
 `params` must be a live handle; `out` valid for writes.
 */
enum SortcycleStatus sortcycle_solve_lambda(const struct SortcycleParams *params,
                                            double z,
                                            double *out);

/*
 Static equilibrium at (z, K, A).

 # Safety
 `params` must be a live handle; `out` valid for writes.
 */
enum SortcycleStatus sortcycle_equilibrium_solve(const struct SortcycleParams *params,
                                                 double z,
                                                 double k,
                                                 double a,
                                                 struct SortcycleEquilibrium **out);

/*
 # Safety
 `eq` must be null or a live handle from this library.
 */
void sortcycle_equilibrium_free(struct SortcycleEquilibrium *eq);

/*
 Writes lambda_t, Y, R and w0.

 # Safety
 `eq` must be a live handle; `out` must point to four doubles.
 */
enum SortcycleStatus sortcycle_equilibrium_summary(const struct SortcycleEquilibrium *eq,
                                                   double *out);

/*
 Full equilibrium as JSON.

 # Safety
 `eq` must be a live handle; `out` valid for writes.
 */
enum SortcycleStatus sortcycle_equilibrium_to_json(const struct SortcycleEquilibrium *eq,
                                                   char **out);

/*
 Aggregate TFP, log Y - alpha log K.

 # Safety
 Both handles must be live; `out` valid for writes.
 */
enum SortcycleStatus sortcycle_measured_tfp(const struct SortcycleParams *params,
                                            const struct SortcycleEquilibrium *eq,
                                            double *out);

/*
 Closed-form cross-sectional variances.

 # Safety
 Both handles must be live; `out` valid for writes.
 */
enum SortcycleStatus sortcycle_analytic_moments(const struct SortcycleParams *params,
                                                const struct SortcycleEquilibrium *eq,
                                                struct SortcycleDispersion *out);

/*
 Moments of a seeded panel of `n_firms` firms, as JSON.

 # Safety
 Both handles must be live; `out` valid for writes.
 */
enum SortcycleStatus sortcycle_panel_moments_json(const struct SortcycleParams *params,
                                                  const struct SortcycleEquilibrium *eq,
                                                  size_t n_firms,
                                                  uint64_t seed,
                                                  char **out);

/*
 Policy on a capital grid of `n_nodes` nodes; 0 selects the default.

 # Safety
 `params` must be a live handle; `out` valid for writes.
 */
enum SortcycleStatus sortcycle_policy_solve(const struct SortcycleParams *params,
                                            size_t n_nodes,
                                            struct SortcyclePolicy **out);

/*
 # Safety
 `policy` must be null or a live handle from this library.
 */
void sortcycle_policy_free(struct SortcyclePolicy *policy);

/*
 Next-period capital chosen in z state `state` (0 or 1) at capital `k`.

 # Safety
 `policy` must be a live handle; `out` valid for writes.
 */
enum SortcycleStatus sortcycle_policy_next_capital(const struct SortcyclePolicy *policy,
                                                   size_t state,
                                                   double k,
                                                   double *out);

/*
 Simulated path moments as JSON.

 # Safety
 `policy` must be a live handle; `out` valid for writes.
 */
enum SortcycleStatus sortcycle_simulate_moments_json(const struct SortcyclePolicy *policy,
                                                     size_t t_len,
                                                     size_t burn_in,
                                                     uint64_t seed,
                                                     char **out);

/*
 Generalized impulse response to a crisis, as JSON.

 # Safety
 `policy` must be a live handle; `out` valid for writes.
 */
enum SortcycleStatus sortcycle_irf_json(const struct SortcyclePolicy *policy,
                                        size_t horizon,
                                        size_t n_sims,
                                        uint64_t seed,
                                        char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SORTCYCLE_H */
