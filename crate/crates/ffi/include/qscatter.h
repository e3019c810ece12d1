#ifndef QSCATTER_H
#define QSCATTER_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum QscComponent {
  QSC_COMPONENT_FULL = 0,
  QSC_COMPONENT_TRANSMITTED = 1,
  QSC_COMPONENT_REFLECTED = 2,
} QscComponent;

typedef enum QscStatus {
  QSC_STATUS_OK = 0,
  QSC_STATUS_NULL_POINTER = 1,
  QSC_STATUS_INVALID_ARGUMENT = 2,
  QSC_STATUS_NUMERICAL = 3,
  QSC_STATUS_INTERNAL = 4,
  QSC_STATUS_PANIC = 5,
} QscStatus;

/**
 * Opaque barrier handle.
 */
typedef struct QscBarrier QscBarrier;

/**
 * Opaque handle to a Gaussian packet and its precomputed spectral data.
 */
typedef struct QscEvolution QscEvolution;

typedef struct QscAmplitudes {
  double k;
  double a_t_re;
  double a_t_im;
  double a_r_re;
  double a_r_im;
  double t;
  double r;
  double unitarity_residual;
} QscAmplitudes;

typedef struct QscDecomposition {
  double k;
  double a_tr_in_re;
  double a_tr_in_im;
  double a_ref_in_re;
  double a_ref_in_im;
  /**
   * 1 for the odd branch, 0 for the even one.
   */
  int32_t odd_branch;
  /**
   * Nonzero when `R` is below the degeneracy threshold.
   */
  int32_t degenerate;
  double sum_residual;
  double modulus_residual;
} QscDecomposition;

typedef struct QscNorms {
  double norm_full;
  double t_t;
  double r_t;
  double overlap_re;
  double overlap_im;
} QscNorms;

typedef struct QscTimes {
  double tau_l_tr;
  /**
   * NaN when the packet has no reflected part.
   */
  double tau_l_ref;
  double phase_delay_k0;
  double phase_traversal_k0;
} QscTimes;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Pointer to the last error message on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *qsc_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *qsc_version(void);

/**
 * Rectangular barrier of height `v0` on `[a, b]`.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum QscStatus qsc_barrier_rectangular(double a, double b, double v0, struct QscBarrier **out);

/**
 * Symmetric staircase from its left half: `n` segments given by `widths`
 * and `heights`, mirrored about the barrier midpoint.
 *
 * # Safety
 * `widths` and `heights` must point to `n` doubles; `out` must be writable.
 */
enum QscStatus qsc_barrier_symmetric(double a,
                                     const double *widths,
                                     const double *heights,
                                     size_t n,
                                     struct QscBarrier **out);

/**
 * # Safety
 * `barrier` must be null or a handle from a `qsc_barrier_*` constructor that
 * has not been freed.
 */
void qsc_barrier_free(struct QscBarrier *barrier);

/**
 * Stationary amplitudes at wavenumber `k`.
 *
 * # Safety
 * `barrier` must be a live handle and `out` writable.
 */
enum QscStatus qsc_solve(const struct QscBarrier *barrier, double k, struct QscAmplitudes *out);

/**
 * Incoming sub-state amplitudes at wavenumber `k`.
 *
 * # Safety
 * `barrier` must be a live handle and `out` writable.
 */
enum QscStatus qsc_decompose(const struct QscBarrier *barrier,
                             double k,
                             struct QscDecomposition *out);

/**
 * Gaussian packet centred at `x0` with width `sigma` and mean wavenumber
 * `k0`, on the default spectral grid.
 *
 * # Safety
 * `barrier` must be a live handle and `out` writable. The evolution keeps
 * its own copy of the barrier.
 */
enum QscStatus qsc_evolution_new(const struct QscBarrier *barrier,
                                 double x0,
                                 double sigma,
                                 double k0,
                                 struct QscEvolution **out);

/**
 * # Safety
 * `evolution` must be null or a live handle from [`qsc_evolution_new`].
 */
void qsc_evolution_free(struct QscEvolution *evolution);

/**
 * Full norm, sub-packet norms and their overlap at time `t`.
 *
 * # Safety
 * `evolution` must be a live handle and `out` writable.
 */
enum QscStatus qsc_evolution_norms(const struct QscEvolution *evolution,
                                   double t,
                                   struct QscNorms *out);

/**
 * Samples one component of the packet at time `t` on `n` points.
 *
 * # Safety
 * `xs`, `out_re` and `out_im` must each point to `n` doubles.
 */
enum QscStatus qsc_evolution_field(const struct QscEvolution *evolution,
                                   enum QscComponent component,
                                   double t,
                                   const double *xs,
                                   size_t n,
                                   double *out_re,
                                   double *out_im);

/**
 * Larmor times of both sub-processes and the phase time at `k0`.
 *
 * # Safety
 * `evolution` must be a live handle and `out` writable.
 */
enum QscStatus qsc_evolution_times(const struct QscEvolution *evolution, struct QscTimes *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QSCATTER_H */
