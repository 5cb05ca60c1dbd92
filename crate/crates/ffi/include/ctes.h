#ifndef CTES_H
#define CTES_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes returned by every fallible function.
 */
typedef enum CtesStatus {
  CTES_STATUS_OK = 0,
  CTES_STATUS_NULL_POINTER = 1,
  CTES_STATUS_INVALID_ARGUMENT = 2,
  CTES_STATUS_CONFIG = 3,
  CTES_STATUS_INPUT = 4,
  CTES_STATUS_TRAINING = 5,
  CTES_STATUS_PARSE = 6,
  CTES_STATUS_VERSION = 7,
  CTES_STATUS_IO = 8,
  CTES_STATUS_BUFFER_TOO_SMALL = 9,
  CTES_STATUS_INTERNAL = 10,
} CtesStatus;

/**
 * Opaque paired dataset.
 */
typedef struct CtesDataset CtesDataset;

/**
 * Opaque fitted model with its settings and seed.
 */
typedef struct CtesModel CtesModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or an empty string.
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *ctes_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ctes_version(void);

/**
 * Simulates the multivariate benchmark: `groups` groups of
 * `samples_per_group` rows with two characteristics and six expressions.
 *
 * # Safety
 * `out` must be a valid pointer to writable handle storage.
 */
enum CtesStatus ctes_dataset_simulate(double sigma,
                                      size_t samples_per_group,
                                      size_t groups,
                                      uint64_t seed,
                                      struct CtesDataset **out);

/**
 * Reads a dataset CSV with `x*`, `y*` and `group` columns.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` valid handle storage.
 */
enum CtesStatus ctes_dataset_load_csv(const char *path, struct CtesDataset **out);

/**
 * Row count and the characteristic and expression widths.
 *
 * # Safety
 * `dataset` must be a live handle; the out pointers must be writable.
 */
enum CtesStatus ctes_dataset_shape(const struct CtesDataset *dataset,
                                   size_t *rows,
                                   size_t *char_dim,
                                   size_t *expr_dim);

/**
 * Copies row-major characteristics into `out`, which holds `capacity`
 * values.
 *
 * # Safety
 * `dataset` must be a live handle and `out` must hold `capacity` doubles.
 */
enum CtesStatus ctes_dataset_characteristics(const struct CtesDataset *dataset,
                                             double *out,
                                             size_t capacity);

/**
 * Releases a dataset handle. Null is ignored.
 *
 * # Safety
 * `dataset` must come from a `ctes_dataset_*` constructor and not be used
 * afterwards.
 */
void ctes_dataset_free(struct CtesDataset *dataset);

/**
 * Fits `method` (`pls`, `grnn`, `cgan`, `gan-cls`, `ctes` or `se-ctes`) on
 * the dataset. `settings_json` may be null for defaults or a JSON object
 * with any of `train`, `k`, `h`, `inverse_classifier`, `pls_components`
 * and `grnn_bandwidth`.
 *
 * # Safety
 * `dataset` must be a live handle, the strings NUL-terminated (or null for
 * `settings_json`) and `out` valid handle storage.
 */
enum CtesStatus ctes_model_train(const struct CtesDataset *dataset,
                                 const char *method,
                                 const char *settings_json,
                                 uint64_t seed,
                                 struct CtesModel **out);

/**
 * Loads a model file written by [`ctes_model_save`] or the command line.
 *
 * # Safety
 * `path` must be NUL-terminated and `out` valid handle storage.
 */
enum CtesStatus ctes_model_load(const char *path, struct CtesModel **out);

/**
 * Writes the model as JSON.
 *
 * # Safety
 * `model` must be a live handle and `path` NUL-terminated.
 */
enum CtesStatus ctes_model_save(const struct CtesModel *model, const char *path);

/**
 * Characteristic and expression widths of a fitted model.
 *
 * # Safety
 * `model` must be a live handle; the out pointers must be writable.
 */
enum CtesStatus ctes_model_dims(const struct CtesModel *model, size_t *char_dim, size_t *expr_dim);

/**
 * Synthesizes one expression per characteristic row. `characteristics`
 * holds `rows * char_dim` row-major values; `out` receives
 * `rows * expr_dim` values and holds `capacity`.
 *
 * # Safety
 * `model` must be a live handle, `characteristics` must hold
 * `rows * char_dim` doubles and `out` must hold `capacity` doubles.
 */
enum CtesStatus ctes_model_synthesize(const struct CtesModel *model,
                                      const double *characteristics,
                                      size_t rows,
                                      size_t char_dim,
                                      uint64_t seed,
                                      double *out,
                                      size_t capacity);

/**
 * Releases a model handle. Null is ignored.
 *
 * # Safety
 * `model` must come from `ctes_model_train` or `ctes_model_load` and not
 * be used afterwards.
 */
void ctes_model_free(struct CtesModel *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CTES_H */
