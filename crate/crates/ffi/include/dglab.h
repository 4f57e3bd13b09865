#ifndef DGLAB_H
#define DGLAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DglabFamily {
  DglabFamily_Gauss = 0,
  DglabFamily_GaussLobatto = 1,
} DglabFamily;

typedef enum DglabStatus {
  DglabStatus_Ok = 0,
  DglabStatus_NullPointer = 1,
  DglabStatus_InvalidArgument = 2,
  DglabStatus_EigenFailure = 3,
  DglabStatus_Positivity = 4,
  DglabStatus_BufferTooSmall = 5,
  DglabStatus_Internal = 6,
} DglabStatus;

typedef struct DglabField DglabField;

typedef struct DglabSolver DglabSolver;

typedef struct DglabVn DglabVn;

/**
 * Per-k mode data returned by `dglab_vn_modes`.
 */
typedef struct DglabModeSummary {
  size_t primary;
  double secondary_error;
  double jump_abs;
  double cond;
} DglabModeSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy the last error message of this thread into `buf` (NUL-terminated,
 * truncated to fit). Returns the full message length in bytes.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t dglab_last_error(char *buf, size_t len);

/**
 * Build a 1D analysis context. `pe` NaN means inviscid; `svv_mu <= 0`
 * disables SVV.
 *
 * # Safety
 * `out` must be valid for one pointer write.
 */
enum DglabStatus dglab_vn_create(size_t n,
                                 enum DglabFamily family,
                                 double lambda,
                                 double pe,
                                 double svv_mu,
                                 double svv_p,
                                 struct DglabVn **out);

/**
 * # Safety
 * `ctx` must come from `dglab_vn_create` and not be used afterwards.
 */
void dglab_vn_free(struct DglabVn *ctx);

/**
 * Modes per element, N + 1.
 *
 * # Safety
 * `ctx` must be a live handle.
 */
size_t dglab_vn_size(const struct DglabVn *ctx);

/**
 * Eigenfrequencies omega at `kh` into `re`/`im` (length at least N + 1),
 * plus the primary-mode summary.
 *
 * # Safety
 * `ctx` live; `re`, `im` valid for `len` doubles; `summary` null or valid.
 */
enum DglabStatus dglab_vn_modes(const struct DglabVn *ctx,
                                double kh,
                                double *re,
                                double *im,
                                size_t len,
                                struct DglabModeSummary *summary);

/**
 * Create a 3D solver from a JSON solver configuration; null selects the
 * defaults.
 *
 * # Safety
 * `json` null or a NUL-terminated string; `out` valid for one write.
 */
enum DglabStatus dglab_solver_create(const char *json, struct DglabSolver **out);

/**
 * # Safety
 * `s` from `dglab_solver_create`, not used afterwards.
 */
void dglab_solver_free(struct DglabSolver *s);

/**
 * Taylor-Green initial field on the solver mesh.
 *
 * # Safety
 * `s` live; `out` valid for one write.
 */
enum DglabStatus dglab_field_tgv(const struct DglabSolver *s, struct DglabField **out);

/**
 * # Safety
 * `f` from `dglab_field_tgv`, not used afterwards.
 */
void dglab_field_free(struct DglabField *f);

/**
 * Number of doubles in the field: E^3 (N+1)^3 * 5.
 *
 * # Safety
 * `f` null or live.
 */
size_t dglab_field_len(const struct DglabField *f);

/**
 * Copy field values (element, node, variable order) into `buf`.
 *
 * # Safety
 * `f` live; `buf` valid for `len` doubles.
 */
enum DglabStatus dglab_field_copy(const struct DglabField *f, double *buf, size_t len);

/**
 * One RK3 step at the stable dt, in place. The field is untouched on error.
 *
 * # Safety
 * `s`, `f` live; `dt_out` null or valid.
 */
enum DglabStatus dglab_solver_step(const struct DglabSolver *s,
                                   struct DglabField *f,
                                   double *dt_out);

/**
 * Domain integrals of the conserved variables (mass, momentum, energy).
 *
 * # Safety
 * `s`, `f` live; `out` valid for 5 doubles.
 */
enum DglabStatus dglab_solver_totals(const struct DglabSolver *s,
                                     const struct DglabField *f,
                                     double *out);

/**
 * Volume-averaged kinetic energy and enstrophy.
 *
 * # Safety
 * `s`, `f` live; `k`, `zeta` null or valid.
 */
enum DglabStatus dglab_solver_diagnostics(const struct DglabSolver *s,
                                          const struct DglabField *f,
                                          double *k,
                                          double *zeta);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DGLAB_H */
