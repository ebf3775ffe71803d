#ifndef HYBRID_CASCADE_H
#define HYBRID_CASCADE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HcStatus {
  HC_STATUS_OK = 0,
  /**
   * Null pointer, bad enum value, invalid UTF-8 or similar misuse.
   */
  HC_STATUS_USAGE = 1,
  /**
   * Invalid or missing data.
   */
  HC_STATUS_DATA = 2,
  /**
   * Convergence, calibration or coupling failure.
   */
  HC_STATUS_CONVERGENCE = 3,
  /**
   * A Rust panic was caught at the boundary.
   */
  HC_STATUS_PANIC = 4,
} HcStatus;

typedef enum HcFormat {
  HC_FORMAT_TABULAR = 0,
  HC_FORMAT_IMAGE_MANIFEST = 1,
} HcFormat;

typedef enum HcStrategy {
  HC_STRATEGY_OVA = 0,
  HC_STRATEGY_OVO = 1,
  HC_STRATEGY_PROBABILISTIC = 2,
} HcStrategy;

typedef struct HcDataset HcDataset;

typedef struct HcHistogram HcHistogram;

typedef struct HcModel HcModel;

/**
 * Options for [`hc_model_train`]. `gamma <= 0` selects the linear kernel.
 * `column_end == 0` uses every column.
 */
typedef struct HcTrainOptions {
  enum HcStrategy strategy;
  double c;
  double gamma;
  uint64_t seed;
  size_t column_start;
  size_t column_end;
} HcTrainOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. The pointer stays
 * valid until the next call into this library on the same thread.
 */
const char *hc_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *hc_version(void);

/**
 * Synthetic dataset from a named preset (`lar2`, `egg9`, `pro7`).
 *
 * # Safety
 * `preset` must be a valid C string and `out` a valid pointer.
 */
enum HcStatus hc_dataset_generate(const char *preset,
                                  double scale,
                                  uint64_t seed,
                                  struct HcDataset **out);

/**
 * # Safety
 * `path` must be a valid C string and `out` a valid pointer.
 */
enum HcStatus hc_dataset_load(const char *path, enum HcFormat format, struct HcDataset **out);

/**
 * Number of samples, or 0 for a null handle.
 *
 * # Safety
 * `ds` must be null or a live dataset handle.
 */
size_t hc_dataset_len(const struct HcDataset *ds);

/**
 * Number of classes, or 0 for a null handle.
 *
 * # Safety
 * `ds` must be null or a live dataset handle.
 */
size_t hc_dataset_classes(const struct HcDataset *ds);

/**
 * Feature dimension, or 0 when samples carry images instead.
 *
 * # Safety
 * `ds` must be null or a live dataset handle.
 */
size_t hc_dataset_dim(const struct HcDataset *ds);

/**
 * Copy the raw feature row and label of sample `index`. `row` must hold
 * `hc_dataset_dim` values.
 *
 * # Safety
 * `ds` must be a live handle, `row` valid for `dim` writes, `label` valid.
 */
enum HcStatus hc_dataset_sample(const struct HcDataset *ds,
                                size_t index,
                                double *row,
                                size_t dim,
                                size_t *label);

/**
 * # Safety
 * `ds` must be null or a handle not yet freed.
 */
void hc_dataset_free(struct HcDataset *ds);

/**
 * Train a multiclass SVM on every sample of `ds` with standardized
 * features and fixed hyper-parameters.
 *
 * # Safety
 * `ds` must be a live handle, `opts` and `out` valid pointers.
 */
enum HcStatus hc_model_train(const struct HcDataset *ds,
                             const struct HcTrainOptions *opts,
                             struct HcModel **out);

/**
 * # Safety
 * `path` must be a valid C string and `out` a valid pointer.
 */
enum HcStatus hc_model_load(const char *path, struct HcModel **out);

/**
 * # Safety
 * `model` must be a live handle and `path` a valid C string.
 */
enum HcStatus hc_model_save(const struct HcModel *model, const char *path);

/**
 * Number of classes, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t hc_model_classes(const struct HcModel *model);

/**
 * Classify one raw feature row. `probs`, when not null, receives one
 * probability per class for the probabilistic strategy and is left
 * untouched otherwise.
 *
 * # Safety
 * `model` must be a live handle, `features` valid for `dim` reads, the
 * output pointers valid, `probs` null or valid for `m` writes.
 */
enum HcStatus hc_model_classify(const struct HcModel *model,
                                const double *features,
                                size_t dim,
                                size_t *class_out,
                                double *confidence_out,
                                double *probs);

/**
 * # Safety
 * `model` must be null or a handle not yet freed.
 */
void hc_model_free(struct HcModel *model);

/**
 * Error histogram over `n` confidence bins from validation predictions.
 *
 * # Safety
 * The three arrays must be valid for `len` reads; `out` must be valid.
 */
enum HcStatus hc_histogram_estimate(const size_t *classes,
                                    const double *confidence,
                                    const size_t *truth,
                                    size_t len,
                                    size_t m,
                                    size_t n,
                                    bool smoothing,
                                    struct HcHistogram **out);

/**
 * Estimated error probability of a cell, both indices 1-based; NaN when
 * out of range or for a null handle.
 *
 * # Safety
 * `h` must be null or a live handle.
 */
double hc_histogram_get(const struct HcHistogram *h, size_t class_, size_t bin);

/**
 * # Safety
 * `path` must be a valid C string and `out` a valid pointer.
 */
enum HcStatus hc_histogram_load(const char *path, struct HcHistogram **out);

/**
 * # Safety
 * `h` must be a live handle and `path` a valid C string.
 */
enum HcStatus hc_histogram_save(const struct HcHistogram *h, const char *path);

/**
 * # Safety
 * `h` must be null or a handle not yet freed.
 */
void hc_histogram_free(struct HcHistogram *h);

/**
 * Choose up to `budget` of `len` DS1 predictions for reclassification.
 * Selected positions are written to `selected` (capacity `len`) in
 * selection order and their number to `count`.
 *
 * # Safety
 * `h` must be a live handle; `classes`/`confidence` valid for `len`
 * reads; `selected` valid for `len` writes; `count` valid.
 */
enum HcStatus hc_select(const struct HcHistogram *h,
                        const size_t *classes,
                        const double *confidence,
                        size_t len,
                        size_t budget,
                        uint64_t seed,
                        size_t *selected,
                        size_t *count);

/**
 * Cohen's kappa of an `m`×`m` row-major confusion matrix (rows are true
 * classes).
 *
 * # Safety
 * `counts` must be valid for `m * m` reads and `out` valid.
 */
enum HcStatus hc_cohen_kappa(const uint64_t *counts, size_t m, double *out);

/**
 * Multiclass probabilities from an `m`×`m` row-major matrix of pairwise
 * estimates r[i][j] ≈ P(i | i or j). The diagonal is ignored.
 *
 * # Safety
 * `r` must be valid for `m * m` reads and `p` for `m` writes.
 */
enum HcStatus hc_pairwise_coupling(const double *r, size_t m, double *p);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HYBRID_CASCADE_H */
