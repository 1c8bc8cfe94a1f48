/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef GMMV_H
#define GMMV_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Outcome of a call. The finer-grained library code is part of the
// last-error message.
typedef enum GmmvStatus {
  GMMV_STATUS_OK = 0,
  GMMV_STATUS_NULL_POINTER = 1,
  GMMV_STATUS_INVALID_STRING = 2,
  GMMV_STATUS_CONFIG = 3,
  GMMV_STATUS_IO = 4,
  GMMV_STATUS_DATA_FORMAT = 5,
  GMMV_STATUS_INVALID_ARGUMENT = 6,
  GMMV_STATUS_SOLVER = 7,
  GMMV_STATUS_PANIC = 8,
} GmmvStatus;

typedef enum GmmvOperatorRoute {
  GMMV_OPERATOR_ROUTE_GREENS = 0,
  GMMV_OPERATOR_ROUTE_FDFD = 1,
} GmmvOperatorRoute;

// Validated experiment configuration.
typedef struct GmmvConfig GmmvConfig;

// Scattered-field measurements.
typedef struct GmmvDataset GmmvDataset;

// Discretized sensing kernels for one grid, geometry and frequency set.
typedef struct GmmvOperator GmmvOperator;

// Reconstructed image, with solver histories for GMMV runs.
typedef struct GmmvResult GmmvResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static nul-terminated string.
const char *gmmv_version(void);

// Length in bytes (without the terminator) of the last error message on
// this thread, or 0 if there is none.
size_t gmmv_last_error_length(void);

// Copies the last error message into `buf` (truncated, always
// nul-terminated when `len > 0`). Returns the full message length.
//
// # Safety
// `buf` must be valid for `len` bytes, or null when `len` is 0.
size_t gmmv_last_error_message(char *buf, size_t len);

// Loads and validates a JSON configuration file.
//
// # Safety
// `path` must be a nul-terminated string; `out` must be writable.
enum GmmvStatus gmmv_config_from_file(const char *path, struct GmmvConfig **out);

// Parses and validates a JSON configuration document.
//
// # Safety
// `json` must be a nul-terminated string; `out` must be writable.
enum GmmvStatus gmmv_config_from_json(const char *json, struct GmmvConfig **out);

// Named scenario, e.g. `two-cylinders`.
//
// # Safety
// `name` must be a nul-terminated string; `out` must be writable.
enum GmmvStatus gmmv_config_preset(const char *name, struct GmmvConfig **out);

// Inversion grid size.
//
// # Safety
// `cfg` must come from a `gmmv_config_*` constructor; outputs writable.
enum GmmvStatus gmmv_config_grid_shape(const struct GmmvConfig *cfg, size_t *nx, size_t *ny);

// # Safety
// `cfg` must be null or a handle not yet freed.
void gmmv_config_free(struct GmmvConfig *cfg);

// Synthesizes measurements for the configured scene. `snr_db` may be
// `INFINITY` for clean data.
//
// # Safety
// `cfg` must be a live handle; `out` must be writable.
enum GmmvStatus gmmv_simulate(const struct GmmvConfig *cfg,
                              double snr_db,
                              uint64_t seed,
                              struct GmmvDataset **out);

// # Safety
// `path` must be a nul-terminated string; `out` must be writable.
enum GmmvStatus gmmv_dataset_read(const char *path, struct GmmvDataset **out);

// # Safety
// `ds` must be a live handle; `path` a nul-terminated string.
enum GmmvStatus gmmv_dataset_write(const struct GmmvDataset *ds, const char *path);

// Number of measured (frequency, source, receiver) triples.
//
// # Safety
// `ds` must be a live handle; `out` writable.
enum GmmvStatus gmmv_dataset_n_records(const struct GmmvDataset *ds, size_t *out);

// Field value at frequency `i`, source `p`, receiver `q`. Unmeasured
// pairs read as zero.
//
// # Safety
// `ds` must be a live handle; `re` and `im` writable.
enum GmmvStatus gmmv_dataset_value(const struct GmmvDataset *ds,
                                   size_t i,
                                   size_t p,
                                   size_t q,
                                   double *re,
                                   double *im);

// # Safety
// `ds` must be null or a handle not yet freed.
void gmmv_dataset_free(struct GmmvDataset *ds);

// Sensing kernels for the configuration's grid and background, with the
// geometry and frequencies of `ds`.
//
// # Safety
// `cfg` and `ds` must be live handles; `out` writable.
enum GmmvStatus gmmv_operator_build(const struct GmmvConfig *cfg,
                                    const struct GmmvDataset *ds,
                                    enum GmmvOperatorRoute route,
                                    struct GmmvOperator **out);

// Relative mismatch of the inner-product identity between the forward
// map and its adjoint on random inputs.
//
// # Safety
// `op` must be a live handle; `out` writable.
enum GmmvStatus gmmv_operator_adjoint_mismatch(const struct GmmvOperator *op,
                                               uint64_t seed,
                                               double *out);

// # Safety
// `op` must be null or a handle not yet freed.
void gmmv_operator_free(struct GmmvOperator *op);

// Joint-sparse inversion with the configuration's solver settings.
// Pass `NAN` as `sigma` to stop by cross validation (the dataset must
// hold a CV split); otherwise the residual target in data units.
//
// # Safety
// All handles must be live; `out` writable.
enum GmmvStatus gmmv_invert(const struct GmmvConfig *cfg,
                            const struct GmmvOperator *op,
                            const struct GmmvDataset *ds,
                            double sigma,
                            struct GmmvResult **out);

// Linear-sampling indicator image on the configuration's grid.
//
// # Safety
// Handles must be live; `out` writable.
enum GmmvStatus gmmv_invert_lsm(const struct GmmvConfig *cfg,
                                const struct GmmvDataset *ds,
                                struct GmmvResult **out);

// Image size; values are row-major with `n = iy * nx + ix`.
//
// # Safety
// `res` must be a live handle; outputs writable.
enum GmmvStatus gmmv_result_shape(const struct GmmvResult *res, size_t *nx, size_t *ny);

// Copies the linear image into `values`, which must hold `nx * ny`
// entries.
//
// # Safety
// `res` must be a live handle; `values` valid for `len` doubles.
enum GmmvStatus gmmv_result_image(const struct GmmvResult *res, double *values, size_t len);

// Number of inner iterations run; the residual histories have one more
// entry (the starting point).
//
// # Safety
// `res` must be a live handle; `out` writable.
enum GmmvStatus gmmv_result_iterations(const struct GmmvResult *res, size_t *out);

// Copies the reconstruction and CV residual histories. Either buffer may
// be null; non-null buffers must hold `iterations + 1` entries.
//
// # Safety
// `res` must be a live handle; buffers valid for `len` doubles.
enum GmmvStatus gmmv_result_residuals(const struct GmmvResult *res,
                                      double *r_rec,
                                      double *r_cv,
                                      size_t len);

// Noise estimate at the CV minimum, or `NAN` for a fixed-target solve.
//
// # Safety
// `res` must be a live handle; `out` writable.
enum GmmvStatus gmmv_result_sigma_hat(const struct GmmvResult *res, double *out);

// # Safety
// `res` must be null or a handle not yet freed.
void gmmv_result_free(struct GmmvResult *res);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GMMV_H */
