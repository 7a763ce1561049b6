#ifndef BSDP_H
#define BSDP_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Return code of every fallible call.
 */
typedef enum BsdpStatus {
  BSDP_STATUS_OK = 0,
  BSDP_STATUS_NULL_ARGUMENT = 1,
  BSDP_STATUS_INVALID_ARGUMENT = 2,
  BSDP_STATUS_IO = 3,
  BSDP_STATUS_SOLVE = 4,
  /**
   * Caller buffer is shorter than the requested data.
   */
  BSDP_STATUS_BUFFER_TOO_SMALL = 5,
  BSDP_STATUS_PANIC = 6,
} BsdpStatus;

/**
 * Why a solve stopped.
 */
typedef enum BsdpTermination {
  BSDP_TERMINATION_CONVERGED = 0,
  BSDP_TERMINATION_MAX_ITER = 1,
  BSDP_TERMINATION_MAX_TIME = 2,
  BSDP_TERMINATION_STAGNATION = 3,
} BsdpTermination;

/**
 * Opaque problem handle.
 */
typedef struct BsdpProblem BsdpProblem;

/**
 * Opaque result handle.
 */
typedef struct BsdpResult BsdpResult;

/**
 * Solver options exposed over the ABI. Initialize with
 * [`bsdp_params_default`] and override fields as needed.
 */
typedef struct BsdpParams {
  double tol;
  size_t maxiter;
  /**
   * Wall-clock limit in seconds.
   */
  double maxtime;
  /**
   * Tolerance at which the first phase hands over.
   */
  double tol_adm;
  /**
   * 0 silences all output.
   */
  int printlevel;
  /**
   * 1 enables the stagnation exit.
   */
  int stopoption;
  /**
   * Nonzero stops after the first phase.
   */
  int phase1_only;
} BsdpParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *bsdp_version(void);

/**
 * Message of the last failing call on this thread, or NULL if none.
 * The pointer stays valid until the next failing call on this thread.
 */
const char *bsdp_last_error(void);

/**
 * Fills `out` with the default options.
 *
 * # Safety
 * `out` must be NULL or point to writable memory for a `BsdpParams`.
 */
enum BsdpStatus bsdp_params_default(struct BsdpParams *out);

/**
 * Reads an SDPA sparse file. With `keep_sign` zero the SDPA maximization
 * is converted to minimization; nonzero keeps `C = F0`.
 *
 * # Safety
 * `path` must be NULL or a NUL-terminated string; `out` must be NULL or writable.
 */
enum BsdpStatus bsdp_problem_read_sdpa(const char *path, int keep_sign, struct BsdpProblem **out);

/**
 * Reads a problem in the JSON exchange format.
 *
 * # Safety
 * `path` must be NULL or a NUL-terminated string; `out` must be NULL or writable.
 */
enum BsdpStatus bsdp_problem_read_json(const char *path, struct BsdpProblem **out);

/**
 * Builds a problem from a generator spec such as `theta:cycle,5`.
 *
 * # Safety
 * `spec` must be NULL or a NUL-terminated string; `out` must be NULL or writable.
 */
enum BsdpStatus bsdp_problem_generate(const char *spec, struct BsdpProblem **out);

/**
 * Writes the problem in the JSON exchange format.
 *
 * # Safety
 * `problem` must be NULL or a live handle; `path` must be NULL or a NUL-terminated string.
 */
enum BsdpStatus bsdp_problem_write_json(const struct BsdpProblem *problem, const char *path);

/**
 * Sizes of the problem: equality rows `m`, inequality rows `p`, number of
 * blocks and total vector dimension. Any output pointer may be NULL.
 *
 * # Safety
 * `problem` must be NULL or a live handle; non-NULL outputs must be writable.
 */
enum BsdpStatus bsdp_problem_dims(const struct BsdpProblem *problem,
                                  size_t *m,
                                  size_t *p,
                                  size_t *nblocks,
                                  size_t *dim);

/**
 * Releases a problem handle. NULL is ignored.
 *
 * # Safety
 * `problem` must be NULL or a handle not yet freed.
 */
void bsdp_problem_free(struct BsdpProblem *problem);

/**
 * Solves `problem`. `params` may be NULL for the defaults. A solve that
 * stops on an iteration or time limit still returns `BSDP_STATUS_OK`; the
 * reason is reported by [`bsdp_result_termination`].
 *
 * # Safety
 * `problem` must be NULL or a live handle; `params` must be NULL or valid;
 * `out` must be NULL or writable.
 */
enum BsdpStatus bsdp_solve(const struct BsdpProblem *problem,
                           const struct BsdpParams *params,
                           struct BsdpResult **out);

/**
 * Primal and dual objective values of the standard form. Either output may be NULL.
 *
 * # Safety
 * `result` must be NULL or a live handle; non-NULL outputs must be writable.
 */
enum BsdpStatus bsdp_result_objectives(const struct BsdpResult *result, double *pobj, double *dobj);

/**
 * Objective in the source sense and scale of a generated problem. Fails
 * with `BSDP_STATUS_INVALID_ARGUMENT` for problems read from files.
 *
 * # Safety
 * `result` must be NULL or a live handle; `out` must be NULL or writable.
 */
enum BsdpStatus bsdp_result_source_objective(const struct BsdpResult *result, double *out);

/**
 * Final relative KKT residual `eta`.
 *
 * # Safety
 * `result` must be NULL or a live handle; `out` must be NULL or writable.
 */
enum BsdpStatus bsdp_result_eta(const struct BsdpResult *result, double *out);

/**
 * Stop reason and iteration counts of both phases. Any output may be NULL.
 *
 * # Safety
 * `result` must be NULL or a live handle; non-NULL outputs must be writable.
 */
enum BsdpStatus bsdp_result_termination(const struct BsdpResult *result,
                                        enum BsdpTermination *termination,
                                        size_t *iter_phase1,
                                        size_t *iter_phase2);

/**
 * Order of block `j` of `X`: the matrix order for PSD blocks, the length
 * for linear blocks.
 *
 * # Safety
 * `result` must be NULL or a live handle; `out` must be NULL or writable.
 */
enum BsdpStatus bsdp_result_block_size(const struct BsdpResult *result, size_t j, size_t *out);

/**
 * Copies block `j` of the primal `X` into `buf` as a dense column-major
 * `n x n` matrix; linear blocks are returned as a diagonal matrix.
 * `len` is the capacity of `buf` in doubles and must be at least `n * n`.
 *
 * # Safety
 * `result` must be NULL or a live handle; `buf` must be NULL or valid for `len` writes.
 */
enum BsdpStatus bsdp_result_x_block(const struct BsdpResult *result,
                                    size_t j,
                                    double *buf,
                                    size_t len);

/**
 * Copies the equality multipliers `y` (length `m`) into `buf`.
 *
 * # Safety
 * `result` must be NULL or a live handle; `buf` must be NULL or valid for `len` writes.
 */
enum BsdpStatus bsdp_result_y(const struct BsdpResult *result, double *buf, size_t len);

/**
 * Writes the full result record (objectives, diagnostics, iterate, history) as JSON.
 *
 * # Safety
 * `result` must be NULL or a live handle; `path` must be NULL or a NUL-terminated string.
 */
enum BsdpStatus bsdp_result_write_json(const struct BsdpResult *result, const char *path);

/**
 * Releases a result handle. NULL is ignored.
 *
 * # Safety
 * `result` must be NULL or a handle not yet freed.
 */
void bsdp_result_free(struct BsdpResult *result);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BSDP_H */
