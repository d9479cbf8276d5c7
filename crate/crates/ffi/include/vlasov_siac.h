#ifndef VLASOV_SIAC_H
#define VLASOV_SIAC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Benchmark selector for [`vs_simulation_new`].
 */
typedef enum VsCase {
  VS_CASE_LANDAU = 0,
  VS_CASE_TWO_STREAM = 1,
  VS_CASE_WEIBEL = 2,
} VsCase;

/*
 Result codes.
 */
typedef enum VsStatus {
  VS_STATUS_OK = 0,
  VS_STATUS_NULL_POINTER = 1,
  VS_STATUS_INVALID_ARGUMENT = 2,
  VS_STATUS_BAD_INPUT = 3,
  VS_STATUS_OUT_OF_DOMAIN = 4,
  VS_STATUS_USAGE = 5,
  VS_STATUS_DIVERGENCE = 6,
  VS_STATUS_PARSE = 7,
  VS_STATUS_IO = 8,
  VS_STATUS_BUFFER_TOO_SMALL = 9,
  VS_STATUS_INTERNAL = 10,
  VS_STATUS_PANIC = 11,
} VsStatus;

/*
 Opaque simulation handle.
 */
typedef struct VsSimulation VsSimulation;

/*
 Monitored integrals of the current state.
 */
typedef struct VsQuantities {
  double t;
  double mass;
  double l2_f;
  double kinetic_energy;
  double field_energy;
} VsQuantities;

/*
 Error norms of one reversibility experiment. Field arrays hold
 `n_fields` entries (1 for Vlasov–Ampère: E; 3 for Weibel: E1, E2, B3).
 */
typedef struct VsErrorReport {
  size_t steps;
  size_t n_fields;
  double f_l2;
  double f_linf;
  double field_l2[3];
  double field_linf[3];
  /*
   Nonzero when the filtered entries below are set.
   */
  int has_filtered;
  double f_l2_filtered;
  double f_linf_filtered;
  double field_l2_filtered[3];
  double field_linf_filtered[3];
} VsErrorReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread, or NULL. The pointer is
 valid until the next call into this library on the same thread.
 */
const char *vs_last_error(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *vs_version(void);

/*
 Creates a simulation with the benchmark defaults for `case`, `nx` cells
 in x and `nv` cells per velocity axis, projected at t = 0.

 # Safety
 `out` must be a valid pointer to writable storage for one handle.
 */
enum VsStatus vs_simulation_new(enum VsCase case_,
                                size_t nx,
                                size_t nv,
                                size_t degree,
                                struct VsSimulation **out);

/*
 Creates a simulation from flat `key = value` configuration text.

 # Safety
 `config` must be a NUL-terminated string; `out` must be writable.
 */
enum VsStatus vs_simulation_from_config(const char *config, struct VsSimulation **out);

/*
 Releases a simulation. NULL is ignored.

 # Safety
 `sim` must come from this library and not be used afterwards.
 */
void vs_simulation_free(struct VsSimulation *sim);

/*
 Advances by `duration` using the configured CFL rule.

 # Safety
 `sim` must be a live handle; `steps` may be NULL.
 */
enum VsStatus vs_simulation_advance(struct VsSimulation *sim, double duration, size_t *steps);

/*
 Replaces the state by its velocity reflection `f(x, -v)` (and `-B`).

 # Safety
 `sim` must be a live handle.
 */
enum VsStatus vs_simulation_reflect(struct VsSimulation *sim);

/*
 Current time and monitored integrals.

 # Safety
 `sim` must be a live handle; `out` must be writable.
 */
enum VsStatus vs_simulation_quantities(const struct VsSimulation *sim, struct VsQuantities *out);

/*
 Phase-space dimension (2 or 3) and number of field components (1 or 3).

 # Safety
 `sim` must be a live handle; output pointers must be writable.
 */
enum VsStatus vs_simulation_shape(const struct VsSimulation *sim, size_t *dim, size_t *n_fields);

/*
 Evaluates `f_h` at a phase-space point (`dim` coordinates: x, v...).
 With `filtered` nonzero the SIAC-filtered value is returned instead.

 # Safety
 `point` must hold `dim` doubles; `out` must be writable.
 */
enum VsStatus vs_simulation_eval_f(const struct VsSimulation *sim,
                                   const double *point,
                                   size_t dim,
                                   int filtered,
                                   double *out);

/*
 Evaluates field component `component` at `x`, optionally filtered.

 # Safety
 `sim` must be a live handle; `out` must be writable.
 */
enum VsStatus vs_simulation_eval_field(const struct VsSimulation *sim,
                                       size_t component,
                                       double x,
                                       int filtered,
                                       double *out);

/*
 Copies the modal coefficients of `f_h` into `buf`. `needed` receives the
 required length; pass `len = 0` to query it.

 # Safety
 `buf` must hold `len` doubles (may be NULL when `len == 0`).
 */
enum VsStatus vs_simulation_f_coefficients(const struct VsSimulation *sim,
                                           double *buf,
                                           size_t len,
                                           size_t *needed);

/*
 Writes a snapshot file readable by the `filter` CLI subcommand.

 # Safety
 `path` must be a NUL-terminated string.
 */
enum VsStatus vs_simulation_save(const struct VsSimulation *sim, const char *path);

/*
 Runs the time-reversal experiment described by configuration text.

 # Safety
 `config` must be a NUL-terminated string; `out` must be writable.
 */
enum VsStatus vs_reversibility(const char *config, struct VsErrorReport *out);

/*
 SIAC kernel coefficients for degree `k` (`2k + 1` values).

 # Safety
 `buf` must hold `len` doubles.
 */
enum VsStatus vs_kernel_coefficients(size_t degree, double *buf, size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VLASOV_SIAC_H */
