#ifndef SHARPBOUND_H
#define SHARPBOUND_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SbStatus {
  SB_STATUS_OK = 0,
  SB_STATUS_NULL_POINTER = 1,
  SB_STATUS_INVALID_UTF8 = 2,
  SB_STATUS_CONFIG_ERROR = 3,
  SB_STATUS_SOLVE_ERROR = 4,
  SB_STATUS_INFEASIBLE = 5,
  SB_STATUS_BOUNDARY_PHI = 6,
  SB_STATUS_NON_CONVERGENCE = 7,
  SB_STATUS_NOT_AVAILABLE = 8,
  SB_STATUS_BUFFER_TOO_SMALL = 9,
  SB_STATUS_DOMAIN_ERROR = 10,
  SB_STATUS_PANIC = 11,
} SbStatus;

typedef enum SbDirection {
  SB_DIRECTION_LOWER = 0,
  SB_DIRECTION_UPPER = 1,
} SbDirection;

/*
 A parsed and validated problem configuration.
 */
typedef struct SbProblem SbProblem;

/*
 Output of [`sb_solve`].
 */
typedef struct SbResult SbResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failure on this thread; empty if none. The pointer is
 valid until the next failing call on the same thread.
 */
const char *sb_last_error_message(void);

/*
 Parses a JSON config (same schema as the command-line tool).

 # Safety
 `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum SbStatus sb_problem_from_json(const char *json, struct SbProblem **out);

/*
 # Safety
 `problem` must come from [`sb_problem_from_json`] and not be freed twice.
 */
void sb_problem_free(struct SbProblem *problem);

/*
 Dimension of X, or 0 for a null handle.

 # Safety
 `problem` must be null or a live handle.
 */
size_t sb_problem_dim(const struct SbProblem *problem);

/*
 Number of moment constraints, or 0 for a null handle.

 # Safety
 `problem` must be null or a live handle.
 */
size_t sb_problem_constraint_count(const struct SbProblem *problem);

/*
 Solves every direction the config requests. A result is produced for
 `Infeasible`, `BoundaryPhi` and `NonConvergence` as well as `Ok`.

 # Safety
 `problem` must be a live handle and `out` a valid pointer.
 */
enum SbStatus sb_solve(const struct SbProblem *problem, struct SbResult **out);

/*
 # Safety
 `result` must come from [`sb_solve`] and not be freed twice.
 */
void sb_result_free(struct SbResult *result);

/*
 Overall status of the run.

 # Safety
 `result` must be null or a live handle.
 */
enum SbStatus sb_result_status(const struct SbResult *result);

/*
 Writes the bound for `direction` (possibly ±infinity) to `out`.

 # Safety
 `result` must be a live handle and `out` a valid pointer.
 */
enum SbStatus sb_result_bound(const struct SbResult *result,
                              enum SbDirection direction,
                              double *out);

/*
 Status of one direction.

 # Safety
 `result` must be a live handle.
 */
enum SbStatus sb_result_direction_status(const struct SbResult *result, enum SbDirection direction);

/*
 Copies the certificate α into `buf`. `len` is the capacity of `buf`; the
 number of multipliers is always written to `out_len`.

 # Safety
 `result` must be a live handle, `buf` must hold `len` doubles (or be null
 with `len == 0`), and `out_len` must be valid.
 */
enum SbStatus sb_result_alpha(const struct SbResult *result,
                              enum SbDirection direction,
                              double *buf,
                              size_t len,
                              size_t *out_len);

/*
 Full report as JSON (without timestamps). Free with [`sb_string_free`].
 Returns null on failure.

 # Safety
 `result` must be a live handle.
 */
char *sb_result_to_json(const struct SbResult *result);

/*
 # Safety
 `s` must come from this library and not be freed twice.
 */
void sb_string_free(char *s);

/*
 Bounds on `E exp(sX)` for `X ≥ 0` with mean `lambda` and variance `var`.
 The upper bound is +infinity for `s > 0`.

 # Safety
 `lower` and `upper` must be valid pointers.
 */
enum SbStatus sb_mgf_bounds(double lambda, double var, double s, double *lower, double *upper);

/*
 Bounds on the power mean `(E X^s)^{1/s}`; `upper` is +infinity when no
 upper bound exists.

 # Safety
 `lower` and `upper` must be valid pointers.
 */
enum SbStatus sb_power_mean_bounds(double lambda,
                                   double var,
                                   double s,
                                   double *lower,
                                   double *upper);

/*
 Largest variance of a law on `[a, b]` with mean `lambda`.

 # Safety
 `upper` must be a valid pointer.
 */
enum SbStatus sb_variance_range(double a, double b, double lambda, double *upper);

/*
 Sharp lower bound of `P(X ≤ a)` for `X ≥ 0` with mean `lambda`.
 */
double sb_markov_bound(double lambda, double a);

/*
 Sharp upper bound of `P(X ≥ lambda)` for `X ≥ a` with `E e^X = 1`.
 */
double sb_jarzynski_bound(double a, double lambda);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SHARPBOUND_H */
