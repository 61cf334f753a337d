#ifndef PLANKTON_H
#define PLANKTON_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  PLK_STATUS_OK = 0,
  PLK_STATUS_NULL_POINTER = 1,
  PLK_STATUS_INVALID_ARGUMENT = 2,
  PLK_STATUS_IO = 3,
  PLK_STATUS_SHAPE = 4,
  PLK_STATUS_FORMAT = 5,
  PLK_STATUS_PANIC = 6,
} PlkStatus;

/**
 * Fitted fuzzy c-means centroids.
 */
typedef struct PlkClusterModel PlkClusterModel;

/**
 * Trained AE/VAE loaded from a checkpoint.
 */
typedef struct PlkEmbedder PlkEmbedder;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf` (NUL
 * terminated, truncated to `len`). Returns the full message length.
 *
 * # Safety
 * `buf` must be null or writable for `len` bytes.
 */
uintptr_t plk_last_error(char *buf, uintptr_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *plk_version(void);

/**
 * Fraction of points whose cluster's majority class equals their own.
 *
 * # Safety
 * `clusters` and `classes` must hold `n` values; `out` must be writable.
 */
PlkStatus plk_purity(const uintptr_t *clusters, const uintptr_t *classes, uintptr_t n, double *out);

/**
 * Number of class collisions: classes sharing a majority cluster.
 *
 * # Safety
 * As [`plk_purity`].
 */
PlkStatus plk_overlaps(const uintptr_t *clusters,
                       const uintptr_t *classes,
                       uintptr_t n,
                       uintptr_t *out);

/**
 * Fits fuzzy c-means on `n` row-major points of length `dim`.
 *
 * # Safety
 * `points` must hold `n * dim` values; `out` must be writable.
 */
PlkStatus plk_cluster_fit(const double *points,
                          uintptr_t n,
                          uintptr_t dim,
                          uintptr_t n_clusters,
                          double m,
                          double tol,
                          uintptr_t max_iter,
                          uint64_t seed,
                          PlkClusterModel **out);

/**
 * Loads a cluster model saved as JSON.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
PlkStatus plk_cluster_load(const char *path, PlkClusterModel **out);

/**
 * # Safety
 * `model` must come from this library; `path` must be NUL-terminated.
 */
PlkStatus plk_cluster_save(const PlkClusterModel *model, const char *path);

/**
 * # Safety
 * `model` must be null or come from this library.
 */
uintptr_t plk_cluster_n_clusters(const PlkClusterModel *model);

/**
 * # Safety
 * `model` must be null or come from this library.
 */
uintptr_t plk_cluster_dim(const PlkClusterModel *model);

/**
 * Writes the `n × n_clusters` membership matrix of new points against the
 * frozen centroids.
 *
 * # Safety
 * `points` must hold `n * dim` values and `out` `n * n_clusters`.
 */
PlkStatus plk_cluster_assign(const PlkClusterModel *model,
                             const double *points,
                             uintptr_t n,
                             double m,
                             double *out);

/**
 * # Safety
 * `model` must be null or come from this library, and not be used again.
 */
void plk_cluster_free(PlkClusterModel *model);

/**
 * Loads an embedder checkpoint.
 *
 * # Safety
 * `path` must be NUL-terminated; `out` must be writable.
 */
PlkStatus plk_embedder_load(const char *path, PlkEmbedder **out);

/**
 * # Safety
 * `model` must be null or come from this library.
 */
uintptr_t plk_embedder_latent_dim(const PlkEmbedder *model);

/**
 * Element count of one input sample.
 *
 * # Safety
 * `model` must be null or come from this library.
 */
uintptr_t plk_embedder_input_len(const PlkEmbedder *model);

/**
 * Embeds `n` samples (row-major, `input_len` each) into `n × latent_dim`.
 *
 * # Safety
 * `samples` must hold `n * input_len` values and `out` `n * latent_dim`.
 */
PlkStatus plk_embedder_encode(const PlkEmbedder *model,
                              const float *samples,
                              uintptr_t n,
                              float *out);

/**
 * # Safety
 * `model` must be null or come from this library, and not be used again.
 */
void plk_embedder_free(PlkEmbedder *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PLANKTON_H */
