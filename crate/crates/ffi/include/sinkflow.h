#ifndef SINKFLOW_H
#define SINKFLOW_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

// Iteration variable of the solver.
typedef enum SkMode {
  SK_MODE_LOG = 0,
  SK_MODE_SCALING = 1,
} SkMode;

// Termination state of a solve.
typedef enum SkSolveStatus {
  SK_SOLVE_STATUS_CONVERGED = 0,
  SK_SOLVE_STATUS_MAX_ITER = 1,
  SK_SOLVE_STATUS_DIVERGED = 2,
} SkSolveStatus;

// Result code of every fallible call.
typedef enum SkStatus {
  SK_STATUS_OK = 0,
  SK_STATUS_NULL_POINTER = 1,
  SK_STATUS_INVALID_ARGUMENT = 2,
  SK_STATUS_PARSE = 3,
  SK_STATUS_BUFFER_TOO_SMALL = 4,
  SK_STATUS_NUMERICAL = 5,
  SK_STATUS_PANIC = 6,
} SkStatus;

// Opaque problem handle.
typedef struct SkProblem SkProblem;

// Opaque solution handle.
typedef struct SkSolution SkSolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread; empty if none. Valid
// until the next failing call on the same thread.
const char *sk_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *sk_version(void);

// Parses a problem from the JSON config format (`domain`, `epsilon`,
// `mu0`, `mu1`; extra solver settings are ignored).
//
// # Safety
// `json` must be a NUL-terminated string and `out` a valid pointer.
enum SkStatus sk_problem_from_json(const char *json, struct SkProblem **out);

// Random problem with `n` atoms per marginal in the unit box of `dim`
// dimensions; `torus_period > 0` selects the flat torus with that period.
//
// # Safety
// `out` must be a valid pointer.
enum SkStatus sk_problem_random(uint64_t seed,
                                uintptr_t n,
                                uintptr_t dim,
                                double epsilon,
                                double torus_period,
                                struct SkProblem **out);

// Number of atoms of each marginal.
//
// # Safety
// All pointers must be valid.
enum SkStatus sk_problem_size(const struct SkProblem *problem, uintptr_t *n0, uintptr_t *n1);

// # Safety
// `problem` must come from this library and not be used afterwards.
void sk_problem_free(struct SkProblem *problem);

// Runs the solver. Divergence and iteration caps are reported through
// `sk_solution_status`, not as errors.
//
// # Safety
// `problem` must be a live handle and `out` a valid pointer.
enum SkStatus sk_solve(const struct SkProblem *problem,
                       double h,
                       double tol,
                       uintptr_t max_iter,
                       enum SkMode mode,
                       struct SkSolution **out);

// Termination state, iteration count and final residual; any output
// pointer may be null.
//
// # Safety
// `solution` must be a live handle; non-null outputs must be valid.
enum SkStatus sk_solution_status(const struct SkSolution *solution,
                                 enum SkSolveStatus *status,
                                 uintptr_t *iterations,
                                 double *residual);

// Copies the gauge-fixed potentials `f` (length `n0`) and `g` (length `n1`).
//
// # Safety
// Buffers must hold at least the stated number of doubles.
enum SkStatus sk_solution_potentials(const struct SkSolution *solution,
                                     double *f,
                                     uintptr_t f_len,
                                     double *g,
                                     uintptr_t g_len);

// Copies the scalings `a = exp f` and `b = exp g`.
//
// # Safety
// Buffers must hold at least the stated number of doubles.
enum SkStatus sk_solution_scalings(const struct SkSolution *solution,
                                   double *a,
                                   uintptr_t a_len,
                                   double *b,
                                   uintptr_t b_len);

// Copies the `n0 × n1` plan, row-major.
//
// # Safety
// `out` must hold at least `len` doubles.
enum SkStatus sk_solution_plan(const struct SkSolution *solution, double *out, uintptr_t len);

// # Safety
// `solution` must come from this library and not be used afterwards.
void sk_solution_free(struct SkSolution *solution);

// Spectral radius of the splitting on the linear test equation.
//
// # Safety
// `out` must be valid.
enum SkStatus sk_stability_radius(double h, double delta, double *out);

// Scans `[h_min, h_max]`; writes the optimal step, its radius and the
// instability onset (NaN if the range never reaches radius 1).
//
// # Safety
// Output pointers must be valid.
enum SkStatus sk_stability_scan(double delta,
                                double h_min,
                                double h_max,
                                uintptr_t steps,
                                double *h_optimal,
                                double *radius_optimal,
                                double *h_onset);

// Heat kernel `K_ε(x, y)` in `dim` dimensions; `periods` null for `ℝⁿ`,
// otherwise `dim` torus periods summed over `image_count` images per side.
//
// # Safety
// `x`, `y` (and `periods` if non-null) must hold `dim` doubles.
enum SkStatus sk_heat_kernel(const double *x,
                             const double *y,
                             uintptr_t dim,
                             double epsilon,
                             const double *periods,
                             uintptr_t image_count,
                             double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SINKFLOW_H */
