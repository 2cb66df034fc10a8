#ifndef BRAINPREF_H
#define BRAINPREF_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum BpStatus {
  BP_OK = 0,
  BP_NULL_POINTER = 1,
  BP_INVALID_INPUT = 2,
  BP_DIMENSION = 3,
  BP_NUMERIC = 4,
  BP_FORMAT = 5,
  BP_IO = 6,
  BP_TOO_MANY_SKIPPED_FOLDS = 7,
  BP_BUFFER_TOO_SMALL = 8,
  BP_PANIC = 9,
} BpStatus;

/*
 Trained shrinkage LDA model. Opaque; release with [`bp_model_free`].
 */
typedef struct BpModel BpModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread, or NULL. The pointer
 stays valid until the next brainpref call on the same thread.
 */
const char *bp_last_error_message(void);

/*
 Trains a shrinkage LDA model on `n` rows of `d` features.

 # Safety
 `x` must point to `n * d` doubles, `labels` to `n` ints and `out` to
 writable storage for one pointer.
 */
enum BpStatus bp_lda_train(const double *x,
                           size_t n,
                           size_t d,
                           const int32_t *labels,
                           struct BpModel **out);

/*
 Releases a model. NULL is ignored.

 # Safety
 `model` must come from this library and not be used afterwards.
 */
void bp_model_free(struct BpModel *model);

/*
 Number of classes, or 0 for NULL.

 # Safety
 `model` must be NULL or a live model.
 */
size_t bp_lda_n_classes(const struct BpModel *model);

/*
 Feature dimension, or 0 for NULL.

 # Safety
 `model` must be NULL or a live model.
 */
size_t bp_lda_dim(const struct BpModel *model);

/*
 Copies the sorted class labels into `out` (capacity `len`).

 # Safety
 `model` must be live and `out` must hold `len` ints.
 */
enum BpStatus bp_lda_classes(const struct BpModel *model, int32_t *out, size_t len);

/*
 Shrinkage intensity chosen at training time.

 # Safety
 `model` must be live and `out` writable.
 */
enum BpStatus bp_lda_lambda(const struct BpModel *model, double *out);

/*
 Class log-probabilities of one sample, in class-label order.

 # Safety
 `x` must hold `d` doubles and `out` `out_len` doubles.
 */
enum BpStatus bp_lda_predict_log_prob(const struct BpModel *model,
                                      const double *x,
                                      size_t d,
                                      double *out,
                                      size_t out_len);

/*
 Writes the model in its binary format.

 # Safety
 `model` must be live and `path` a NUL-terminated string.
 */
enum BpStatus bp_lda_save(const struct BpModel *model, const char *path);

/*
 Reads a model written by [`bp_lda_save`].

 # Safety
 `path` must be a NUL-terminated string and `out` writable.
 */
enum BpStatus bp_lda_load(const char *path, struct BpModel **out);

/*
 Binary AUC of `scores`; `positive[i]` nonzero marks a positive sample.
 Ties count one half.

 # Safety
 `scores` and `positive` must hold `n` values; `out` must be writable.
 */
enum BpStatus bp_auc(const double *scores, const uint8_t *positive, size_t n, double *out);

/*
 Ledoit-Wolf shrunk covariance (`d * d`, row-major) and intensity of the
 rows of `x`.

 # Safety
 `x` must hold `n * d` doubles, `cov_out` `d * d` doubles and
 `lambda_out` must be writable.
 */
enum BpStatus bp_ledoit_wolf(const double *x,
                             size_t n,
                             size_t d,
                             double *cov_out,
                             double *lambda_out);

/*
 Leave-one-out shrinkage LDA AUC of `labels` on `x`, with the add-one
 permutation p-value over `n_perm` shuffles drawn from `seed`.

 # Safety
 `x` must hold `n * d` doubles, `labels` `n` ints; outputs writable.
 */
enum BpStatus bp_permutation_test(const double *x,
                                  size_t n,
                                  size_t d,
                                  const int32_t *labels,
                                  size_t n_perm,
                                  uint64_t seed,
                                  double *auc_out,
                                  double *p_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BRAINPREF_H */
