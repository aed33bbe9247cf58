#ifndef EMO_FFI_H
#define EMO_FFI_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum EmoStatus {
  EMO_STATUS_OK = 0,
  /**
   * The run finished without meeting the stop rule. The result handle
   * is still produced.
   */
  EMO_STATUS_NOT_CONVERGED = 1,
  EMO_STATUS_NULL_POINTER = 2,
  EMO_STATUS_INVALID_ARGUMENT = 3,
  EMO_STATUS_INVALID_PROBLEM = 4,
  /**
   * Non-finite state or integrator fault.
   */
  EMO_STATUS_NUMERICAL = 5,
  EMO_STATUS_BUFFER_TOO_SMALL = 6,
  EMO_STATUS_PANIC = 7,
} EmoStatus;

typedef enum EmoAlgorithm {
  EMO_ALGORITHM_DPOFA = 0,
  EMO_ALGORITHM_DDFA = 1,
} EmoAlgorithm;

/**
 * Opaque problem handle.
 */
typedef struct EmoProblemHandle EmoProblemHandle;

/**
 * Opaque result handle.
 */
typedef struct EmoResultHandle EmoResultHandle;

/**
 * Integration settings. Non-positive `h`, `t_end` or `tol`, and a zero
 * `dwell`, keep the problem's configured value.
 */
typedef struct EmoSolveOptions {
  double h;
  double t_end;
  double tol;
  size_t dwell;
} EmoSolveOptions;

typedef struct EmoKkt {
  double stationarity;
  double feasibility;
  double consensus;
} EmoKkt;

typedef struct EmoRunInfo {
  bool converged;
  size_t steps;
  double final_time;
  double h_final;
  size_t dim;
  size_t multipliers;
} EmoRunInfo;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failing call on this thread. Valid until the next
 * failing call on the same thread; empty when nothing failed yet.
 */
const char *emo_last_error_message(void);

const char *emo_version(void);

struct EmoSolveOptions emo_default_options(void);

/**
 * Loads `nonsmooth10`, `netflow6x12` or `minnorm` (`seed` only affects
 * `minnorm`).
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum EmoStatus emo_problem_builtin(const char *name, uint64_t seed, struct EmoProblemHandle **out);

/**
 * Builds a problem from TOML experiment text (the format read by
 * `emo run --config`).
 *
 * # Safety
 * `toml` must be a NUL-terminated string and `out` a valid pointer.
 */
enum EmoStatus emo_problem_from_config(const char *toml, struct EmoProblemHandle **out);

/**
 * # Safety
 * `problem` must come from `emo_problem_*` and not have been freed; null
 * is accepted.
 */
void emo_problem_free(struct EmoProblemHandle *problem);

/**
 * Agents, coupling rows and total decision dimension.
 *
 * # Safety
 * `problem` must be a live handle; output pointers may be null.
 */
enum EmoStatus emo_problem_dims(const struct EmoProblemHandle *problem,
                                size_t *n,
                                size_t *m,
                                size_t *dim);

/**
 * Integrates one algorithm from the default initial state. Returns
 * `EMO_STATUS_OK` when the stop rule fired and `EMO_STATUS_NOT_CONVERGED`
 * when `t_end` was reached first; both produce a result handle.
 *
 * # Safety
 * `problem` must be a live handle, `options` null or valid, `out` valid.
 */
enum EmoStatus emo_solve(const struct EmoProblemHandle *problem,
                         enum EmoAlgorithm algorithm,
                         const struct EmoSolveOptions *options,
                         struct EmoResultHandle **out);

/**
 * # Safety
 * `result` must come from `emo_solve` and not have been freed; null is
 * accepted.
 */
void emo_result_free(struct EmoResultHandle *result);

/**
 * Copies the final decision vector into `buf`. `*written` receives the
 * vector length; a `len` shorter than that yields
 * `EMO_STATUS_BUFFER_TOO_SMALL` and copies nothing.
 *
 * # Safety
 * `result` must be a live handle and `buf` valid for `len` doubles
 * (null is allowed when `len` is 0).
 */
enum EmoStatus emo_result_x(const struct EmoResultHandle *result,
                            double *buf,
                            size_t len,
                            size_t *written);

/**
 * # Safety
 * `result` must be a live handle and `out` valid.
 */
enum EmoStatus emo_result_kkt(const struct EmoResultHandle *result, struct EmoKkt *out);

/**
 * # Safety
 * `result` must be a live handle and `out` valid.
 */
enum EmoStatus emo_result_info(const struct EmoResultHandle *result, struct EmoRunInfo *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EMO_FFI_H */
