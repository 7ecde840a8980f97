#ifndef MEASDIFF_H
#define MEASDIFF_H

#pragma once

/* Generated with cbindgen:0.29.4 */

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MdStatus {
  MD_STATUS_OK = 0,
  MD_STATUS_NULL_POINTER = 1,
  MD_STATUS_INVALID_ARGUMENT = 2,
  MD_STATUS_CONFIG = 3,
  MD_STATUS_BUDGET_EXCEEDED = 4,
  MD_STATUS_INVARIANT_VIOLATED = 5,
  MD_STATUS_BUFFER_TOO_SMALL = 6,
  MD_STATUS_INTERNAL = 7,
  MD_STATUS_PANIC = 8,
} MdStatus;

/**
 * Opaque handle to a validated kicked system.
 */
typedef struct MdSystem MdSystem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Kicked rotator `H0 = p^2 / 2I`, `V = cos x`. `grid = 0` picks the default.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum MdStatus md_system_rotator(double inertia,
                                double lambda,
                                double period,
                                double tau,
                                double hbar,
                                size_t basis_m,
                                size_t grid,
                                struct MdSystem **out);

/**
 * Build a system from the `[system]` section of a TOML configuration.
 *
 * # Safety
 * `text` must be a NUL-terminated UTF-8 string; `out` must be writable.
 */
enum MdStatus md_system_from_toml(const char *text, struct MdSystem **out);

/**
 * Release a handle. Null is ignored.
 *
 * # Safety
 * `sys` must come from `md_system_*` and not have been freed already.
 */
void md_system_free(struct MdSystem *sys);

/**
 * Angle average of the squared force, `<f^2>`.
 *
 * # Safety
 * `sys` must be a live handle and `out` writable.
 */
enum MdStatus md_mean_force_squared(const struct MdSystem *sys, double *out);

/**
 * Quasilinear diffusion constant `lambda^2 <f^2> / T`.
 *
 * # Safety
 * `sys` must be a live handle and `out` writable.
 */
enum MdStatus md_quasilinear_diffusion(const struct MdSystem *sys, double *out);

/**
 * Transition probability `W_nm`; zero for indices outside `[-M, M]`.
 *
 * # Safety
 * `sys` must be a live handle and `out` writable.
 */
enum MdStatus md_transition_entry(const struct MdSystem *sys, int64_t n, int64_t m, double *out);

/**
 * Half-bandwidth of the stored transition matrix.
 *
 * # Safety
 * `sys` must be a live handle and `out` writable.
 */
enum MdStatus md_transition_bandwidth(const struct MdSystem *sys, size_t *out);

/**
 * Measured evolution from `|initial_index>`. Writes `(kicks + 1) * 4` values
 * `<p>, <p^2>, <p^3>, <p^4>` per record into `out`.
 *
 * # Safety
 * `sys` must be a live handle; `out` must point to `len` writable doubles.
 */
enum MdStatus md_evolve_measured(const struct MdSystem *sys,
                                 int64_t initial_index,
                                 size_t kicks,
                                 double leak_budget,
                                 double *out,
                                 size_t len);

/**
 * Coherent evolution from `|initial_index>`; same output layout as
 * `md_evolve_measured`.
 *
 * # Safety
 * `sys` must be a live handle; `out` must point to `len` writable doubles.
 */
enum MdStatus md_evolve_coherent(const struct MdSystem *sys,
                                 int64_t initial_index,
                                 size_t kicks,
                                 double leak_budget,
                                 double *out,
                                 size_t len);

/**
 * Bessel function of the first kind `J_order(x)`.
 *
 * # Safety
 * `out` must be writable.
 */
enum MdStatus md_bessel_j(int64_t order, double x, double *out);

/**
 * Copy the calling thread's last error message into `buf` (NUL-terminated,
 * truncated to fit). Returns the full message length in bytes, excluding the
 * terminator; pass a null `buf` to query it.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t md_last_error(char *buf, size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MEASDIFF_H */
