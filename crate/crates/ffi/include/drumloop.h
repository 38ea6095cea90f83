#ifndef DRUMLOOP_H
#define DRUMLOOP_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every call.
 */
typedef enum DlStatus {
  DL_STATUS_OK = 0,
  DL_STATUS_NULL_POINTER = 1,
  DL_STATUS_INVALID_ARGUMENT = 2,
  DL_STATUS_IO = 3,
  DL_STATUS_FORMAT = 4,
  DL_STATUS_SHAPE = 5,
  DL_STATUS_NON_FINITE = 6,
  DL_STATUS_BUFFER_TOO_SMALL = 7,
  DL_STATUS_PANIC = 8,
} DlStatus;

/**
 * A loaded model.
 */
typedef struct DlModel DlModel;

/**
 * Min-max statistics of the timbral features.
 */
typedef struct DlNormStats DlNormStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty if none. Valid
 * until the next failing call on the same thread.
 */
const char *dl_last_error(void);

/**
 * Library version, a static NUL-terminated string.
 */
const char *dl_version(void);

/**
 * Loads a checkpoint file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum DlStatus dl_model_load(const char *path, struct DlModel **out);

/**
 * Releases a model; null is ignored.
 *
 * # Safety
 * `model` must come from [`dl_model_load`] and not be used afterwards.
 */
void dl_model_free(struct DlModel *model);

/**
 * Conditioning channels the model expects and samples it produces.
 *
 * # Safety
 * All pointers must be valid.
 */
enum DlStatus dl_model_shape(const struct DlModel *model, size_t *channels, size_t *length);

/**
 * Renders audio from `channels × length` row-major conditioning into
 * `out`, which must hold at least `length` samples. Magnitude models use
 * `iterations` Griffin-Lim steps seeded with `seed`.
 *
 * # Safety
 * `conditioning` must point to `channels · length` floats and `out` to
 * `out_len` floats.
 */
enum DlStatus dl_model_synthesize(const struct DlModel *model,
                                  const float *conditioning,
                                  size_t channels,
                                  size_t length,
                                  size_t iterations,
                                  uint64_t seed,
                                  float *out,
                                  size_t out_len);

/**
 * Loads normalization statistics written by the prepare step.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum DlStatus dl_norm_stats_load(const char *path, struct DlNormStats **out);

/**
 * Releases statistics; null is ignored.
 *
 * # Safety
 * `stats` must come from [`dl_norm_stats_load`] and not be used afterwards.
 */
void dl_norm_stats_free(struct DlNormStats *stats);

/**
 * Extracts model conditioning from 16 kHz mono samples. Writes
 * `channels × len` row-major values (37 with the envelope, 36 without)
 * into `out` and the channel count into `channels`.
 *
 * # Safety
 * `samples` must point to `len` doubles and `out` to `out_len` floats.
 */
enum DlStatus dl_extract_conditioning(const struct DlNormStats *stats,
                                      const double *samples,
                                      size_t len,
                                      bool include_envelope,
                                      float *out,
                                      size_t out_len,
                                      size_t *channels);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DRUMLOOP_H */
