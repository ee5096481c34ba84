#ifndef SFL_FFI_H
#define SFL_FFI_H

/* Generated from the Rust sources by cbindgen; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call in this API.
 */
typedef enum SflStatus {
  /**
   * The call succeeded.
   */
  SFL_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  SFL_STATUS_NULL_ARGUMENT = 1,
  /**
   * An argument value or buffer shape was rejected.
   */
  SFL_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Training could not produce a model (for example single-class labels).
   */
  SFL_STATUS_TRAINING_FAILED = 3,
  /**
   * An internal panic was caught at the boundary.
   */
  SFL_STATUS_PANIC = 4,
} SflStatus;

/**
 * A trained random forest handle.
 */
typedef struct SflForest SflForest;

/**
 * A trained gated fusion classifier together with the feature scalers
 * fitted on its training data.
 */
typedef struct SflModel SflModel;

/**
 * Training hyper-parameters for [`sfl_model_train`]. Obtain defaults with
 * [`sfl_train_options_default`] and override selectively.
 */
typedef struct SflTrainOptions {
  double learning_rate;
  size_t batch_size;
  size_t max_epochs;
  /**
   * Epochs without validation improvement tolerated before stopping.
   */
  size_t early_stop_patience;
  /**
   * Fraction of training rows held out for early stopping; 0 monitors
   * the training loss instead.
   */
  double validation_fraction;
  uint64_t seed;
  double adam_beta1;
  double adam_beta2;
  double adam_epsilon;
} SflTrainOptions;

/**
 * Forest hyper-parameters for [`sfl_forest_train`]. Obtain defaults with
 * [`sfl_forest_options_default`].
 */
typedef struct SflForestOptions {
  size_t n_trees;
  /**
   * Features sampled per split; 0 selects floor(sqrt(n_features)).
   */
  size_t max_features;
  size_t min_samples_leaf;
  /**
   * Depth limit; 0 grows trees until leaves are pure or too small.
   */
  size_t max_depth;
  bool bootstrap;
  uint64_t seed;
} SflForestOptions;

/**
 * The headline evaluation metrics for one probability vector.
 */
typedef struct SflEvalSummary {
  double accuracy;
  double macro_f1;
  double mcc;
  double brier;
  double log_loss;
  double ece;
  double auc;
  double average_precision;
} SflEvalSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Returns the description of the most recent failure on this thread, or
 * null if nothing has failed yet. Owned by the library; do not free.
 */
const char *sfl_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *sfl_version(void);

/**
 * Fills `out` with the default training options.
 *
 * # Safety
 * `out` must be a valid pointer to an [`SflTrainOptions`].
 */
enum SflStatus sfl_train_options_default(struct SflTrainOptions *out);

/**
 * Trains a gated fusion model.
 *
 * `deep` is `n_rows * deep_dim` embeddings, `aux` is `n_rows * 4`
 * structure features, both row-major and unscaled; standardization
 * parameters are fitted here and stored in the model. `labels` holds
 * `n_rows` values in {0, 1}. `options` may be null for defaults. On
 * success `*out_model` receives a handle to release with
 * [`sfl_model_free`].
 *
 * # Safety
 * All buffers must match the stated lengths; `out_model` must be a valid
 * pointer.
 */
enum SflStatus sfl_model_train(const double *deep,
                               size_t n_rows,
                               size_t deep_dim,
                               const double *aux,
                               const uint8_t *labels,
                               const struct SflTrainOptions *options,
                               struct SflModel **out_model);

/**
 * Writes the model's embedding width to `out_dim`.
 *
 * # Safety
 * `model` must be a live handle from [`sfl_model_train`]; `out_dim` must
 * be a valid pointer.
 */
enum SflStatus sfl_model_deep_dim(const struct SflModel *model, size_t *out_dim);

/**
 * Predicts Class-1 probabilities for `n_rows` new rows.
 *
 * Inputs are raw (unscaled) features with the same column layout as
 * training; `deep_dim` must equal the model's width. `out_probs` receives
 * `n_rows` values in [0, 1].
 *
 * # Safety
 * `model` must be a live handle; buffers must match the stated lengths.
 */
enum SflStatus sfl_model_predict(const struct SflModel *model,
                                 const double *deep,
                                 size_t n_rows,
                                 size_t deep_dim,
                                 const double *aux,
                                 double *out_probs);

/**
 * Releases a model handle. Null is a no-op.
 *
 * # Safety
 * `model` must be null or a handle not yet freed.
 */
void sfl_model_free(struct SflModel *model);

/**
 * Fills `out` with the default forest options.
 *
 * # Safety
 * `out` must be a valid pointer to an [`SflForestOptions`].
 */
enum SflStatus sfl_forest_options_default(struct SflForestOptions *out);

/**
 * Trains a random forest on `n_rows * n_features` row-major data with
 * labels in {0, 1}. `options` may be null for defaults. On success
 * `*out_forest` receives a handle to release with [`sfl_forest_free`].
 *
 * # Safety
 * All buffers must match the stated lengths; `out_forest` must be a valid
 * pointer.
 */
enum SflStatus sfl_forest_train(const double *rows,
                                size_t n_rows,
                                size_t n_features,
                                const uint8_t *labels,
                                const struct SflForestOptions *options,
                                struct SflForest **out_forest);

/**
 * Writes the forest's feature width to `out_n`.
 *
 * # Safety
 * `forest` must be a live handle; `out_n` must be a valid pointer.
 */
enum SflStatus sfl_forest_n_features(const struct SflForest *forest, size_t *out_n);

/**
 * Predicts Class-1 probabilities for `n_rows` rows with the same feature
 * layout as training. `out_probs` receives `n_rows` values.
 *
 * # Safety
 * `forest` must be a live handle; buffers must match the stated lengths.
 */
enum SflStatus sfl_forest_predict(const struct SflForest *forest,
                                  const double *rows,
                                  size_t n_rows,
                                  size_t n_features,
                                  double *out_probs);

/**
 * Writes the forest's normalized impurity-decrease importances, one per
 * feature, to `out_importances`. `len` must equal the feature width.
 *
 * # Safety
 * `forest` must be a live handle; `out_importances` must hold `len`
 * writable values.
 */
enum SflStatus sfl_forest_mdi(const struct SflForest *forest, double *out_importances, size_t len);

/**
 * Releases a forest handle. Null is a no-op.
 *
 * # Safety
 * `forest` must be null or a handle not yet freed.
 */
void sfl_forest_free(struct SflForest *forest);

/**
 * Evaluates `n` (label, probability) pairs at the 0.5 threshold and fills
 * `out` with the summary metrics. Labels must be in {0, 1} and include
 * both classes; probabilities must lie in [0, 1].
 *
 * # Safety
 * `labels` and `probs` must hold `n` readable values; `out` must be a
 * valid pointer.
 */
enum SflStatus sfl_evaluate(const uint8_t *labels,
                            const double *probs,
                            size_t n,
                            struct SflEvalSummary *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SFL_FFI_H */
