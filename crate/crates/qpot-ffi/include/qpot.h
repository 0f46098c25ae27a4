#ifndef QPOT_H
#define QPOT_H

/* Generated from src/lib.rs by the build script; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call in this interface.
typedef enum QpotStatus {
  // The call succeeded and every output pointer was written.
  QPOT_OK = 0,
  // A required pointer argument was null.
  QPOT_ERR_NULL_ARGUMENT = 1,
  // An argument failed validation (dimension, range, or format).
  QPOT_ERR_INVALID_ARGUMENT = 2,
  // The compact set does not fit inside the domain ball.
  QPOT_ERR_COMPACT_NOT_INSIDE = 3,
  // A matrix argument was not hyperhermitian.
  QPOT_ERR_NOT_HYPERHERMITIAN = 4,
  // The obstacle solver hit its iteration budget before reaching the
  // requested tolerance.
  QPOT_ERR_SOLVER_STALLED = 5,
  // Reading or writing a file failed.
  QPOT_ERR_IO = 6,
  // A string argument was not valid UTF-8.
  QPOT_ERR_UTF8 = 7,
  // An internal invariant broke; the library caught the panic.
  QPOT_ERR_PANIC = 8,
} QpotStatus;

// A compact subset of the domain ball, built as a finite union of closed
// balls. Opaque; see `qpot_compact_new`.
typedef struct QpotCompact QpotCompact;

// A solved extremal function on its lattice. Opaque; see
// `qpot_extremal_solve`.
typedef struct QpotExtremal QpotExtremal;

// Capacity of a compact set together with its solver diagnostics.
typedef struct QpotCapacity {
  // The Monge-Ampère mass of the extremal function.
  double value;
  // Total relaxation sweeps across all warm-start levels.
  uint64_t iterations;
  // Largest pointwise update in the final sweep.
  double residual;
  // Fraction of the mass within three lattice steps of the set
  // boundary (1 when the set is empty).
  double near_boundary_fraction;
} QpotCapacity;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copy the most recent error message on this thread into `buf` as a
// NUL-terminated string, truncating if `cap` is too small. Returns the
// full message length in bytes, excluding the terminator; call with a
// null `buf` or zero `cap` to query the length alone. The message is
// replaced by the next failing call on the same thread.
//
// # Safety
//
// `buf` must either be null or point to at least `cap` writable bytes.
size_t qpot_last_error(char *buf, size_t cap);

// Monge-Ampère density of `|q|^2` in dimension `n`, the constant that
// calibrates every density computation (8 for n = 1, 128 for n = 2).
// Computed exactly and converted to double at the end.
//
// # Safety
//
// `out` must point to a writable double.
enum QpotStatus qpot_density_constant(size_t n, double *out);

// Run the exact differential-identity suite over `count` random
// polynomials in every dimension from 1 to `max_dimension`, writing the
// worst signed margin (0 means every identity held exactly; negative
// means a violation). `defect_id` may be null for a healthy operator
// table, or one of the deliberate defect names
// (`sign-flip-nabla00`, `drop-half-delta-ij`, `wrong-perm-sign`) to
// demonstrate that the suite catches a broken table.
//
// # Safety
//
// `out_worst_margin` must point to a writable double; `defect_id` must
// be null or a NUL-terminated string.
enum QpotStatus qpot_check_identities(uint64_t seed,
                                      size_t count,
                                      size_t max_dimension,
                                      const char *defect_id,
                                      double *out_worst_margin);

// Create an empty compact set. Add balls with `qpot_compact_add_ball`;
// release with `qpot_compact_free`. Returns null only if allocation
// fails inside the library.
struct QpotCompact *qpot_compact_new(void);

// Add the closed ball with the given center and radius to the union.
//
// # Safety
//
// `compact` must be a live handle from `qpot_compact_new`; `center`
// must point to 4 readable doubles.
enum QpotStatus qpot_compact_add_ball(struct QpotCompact *compact,
                                      const double *center,
                                      double radius);

// Release a compact set handle. Null is accepted and ignored.
//
// # Safety
//
// `compact` must be null or a handle from `qpot_compact_new` that has
// not been freed already.
void qpot_compact_free(struct QpotCompact *compact);

// Capacity of the compact set relative to the origin-centered domain
// ball of radius `omega_radius`, solved on a lattice with `resolution`
// cells per axis (odd, at least 5) to the given solver tolerance.
//
// # Safety
//
// `compact` must be a live handle; `out` must point to a writable
// `QpotCapacity`.
enum QpotStatus qpot_capacity(const struct QpotCompact *compact,
                              double omega_radius,
                              size_t resolution,
                              double tolerance,
                              struct QpotCapacity *out);

// Solve the obstacle problem for the compact set and return a handle to
// the extremal function. Release with `qpot_extremal_free`.
//
// # Safety
//
// `compact` must be a live handle; `out` must point to a writable
// handle slot.
enum QpotStatus qpot_extremal_solve(const struct QpotCompact *compact,
                                    double omega_radius,
                                    size_t resolution,
                                    double tolerance,
                                    struct QpotExtremal **out);

// Value of the extremal function at the lattice cell nearest to `point`.
//
// # Safety
//
// `handle` must be a live handle from `qpot_extremal_solve`; `point`
// must point to 4 readable doubles; `out` to a writable double.
enum QpotStatus qpot_extremal_value(const struct QpotExtremal *handle,
                                    const double *point,
                                    double *out);

// Solver diagnostics of an extremal handle: total sweeps and the final
// residual. Either output may be null to skip it.
//
// # Safety
//
// `handle` must be a live handle; non-null outputs must be writable.
enum QpotStatus qpot_extremal_info(const struct QpotExtremal *handle,
                                   uint64_t *out_iterations,
                                   double *out_residual);

// Write the extremal function to `path` in the library's grid format.
//
// # Safety
//
// `handle` must be a live handle; `path` a NUL-terminated string.
enum QpotStatus qpot_extremal_export(const struct QpotExtremal *handle, const char *path);

// Release an extremal handle. Null is accepted and ignored.
//
// # Safety
//
// `handle` must be null or a handle from `qpot_extremal_solve` that has
// not been freed already.
void qpot_extremal_free(struct QpotExtremal *handle);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QPOT_H */
