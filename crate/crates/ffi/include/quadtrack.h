#ifndef QUADTRACK_H
#define QUADTRACK_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of a C API call.
 */
typedef enum QtStatus {
  QT_STATUS_OK = 0,
  QT_STATUS_NULL_POINTER = 1,
  QT_STATUS_INVALID_ARGUMENT = 2,
  QT_STATUS_DOMAIN = 3,
  QT_STATUS_IO = 4,
  QT_STATUS_PARSE = 5,
  QT_STATUS_FIXED_POINT = 6,
  QT_STATUS_DATA = 7,
  QT_STATUS_UNDEFINED_FIELD = 8,
  QT_STATUS_PANIC = 9,
} QtStatus;

/**
 * A potential table with its coefficient source.
 */
typedef struct QtField QtField;

/**
 * A configured one-step map.
 */
typedef struct QtIntegrator QtIntegrator;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len - 1` bytes) and returns the full message length.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t qt_last_error_message(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *qt_version(void);

/**
 * Analytic step-gradient quadrupole sampled every `dz` on `[0, zmax]`.
 *
 * `gauge` is one of `af`, `coulomb`, `hfc`; `mode` one of `exact`,
 * `spline`, `interval`, `nearest`, `previous`.
 *
 * # Safety
 * String arguments must be null or NUL-terminated; `out` must be null or writable.
 */
enum QtStatus qt_field_analytic(double alpha,
                                double l1,
                                double l2,
                                double z2,
                                double zmax,
                                double dz,
                                uint32_t nd,
                                const char *gauge,
                                const char *mode,
                                struct QtField **out);

/**
 * Field reconstructed from a harmonics file. `radius <= 0` takes the radius
 * from the file header; `pad > 0` adds that much zero padding at each end.
 *
 * # Safety
 * String arguments must be null or NUL-terminated; `out` must be null or writable.
 */
enum QtStatus qt_field_from_harmonics(const char *path,
                                      double radius,
                                      double pad,
                                      uint32_t nd,
                                      double scale,
                                      const char *gauge,
                                      const char *mode,
                                      struct QtField **out);

/**
 * # Safety
 * `field` must be null or a pointer returned by a `qt_field_*` constructor, freed once.
 */
void qt_field_free(struct QtField *field);

/**
 * Number of stored terms of `A_x`, `A_y`, `A_z`.
 *
 * # Safety
 * `field` must be a live handle; `counts` must point to 3 writable values.
 */
enum QtStatus qt_field_counts(const struct QtField *field, size_t *counts);

/**
 * `(A_x, A_y, A_z)` at `(x, y, z)`.
 *
 * # Safety
 * `field` must be a live handle not used concurrently; `a` must point to 3 writable values.
 */
enum QtStatus qt_field_potential(struct QtField *field, double x, double y, double z, double *a);

/**
 * Integrator by name (`midpoint`, `rk4`, `gauss4`, `gauss6`, `lie2`,
 * `lie4`, `lie6`). Non-positive `fp_tol` or zero `fp_max` keep the defaults.
 *
 * # Safety
 * `method` must be null or NUL-terminated; `out` must be null or writable.
 */
enum QtStatus qt_integrator_new(const char *method,
                                double step,
                                double fp_tol,
                                uint32_t fp_max,
                                struct QtIntegrator **out);

/**
 * # Safety
 * `integrator` must be null or a pointer from [`qt_integrator_new`], freed once.
 */
void qt_integrator_free(struct QtIntegrator *integrator);

/**
 * Tracks `state_in = (X, Y, P_x, P_y)` through `pairs` focusing/defocusing
 * couples of `field`, or through the single magnet when `pairs` is 0.
 * Writes the exit (or last surviving) state and whether the particle was lost.
 *
 * # Safety
 * Handles must be live; `state_in` and `state_out` must point to 4 values;
 * `lost` must be null or writable.
 */
enum QtStatus qt_track(const struct QtField *field,
                       const struct QtIntegrator *integrator,
                       size_t pairs,
                       const double *state_in,
                       double delta,
                       double *state_out,
                       bool *lost);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QUADTRACK_H */
