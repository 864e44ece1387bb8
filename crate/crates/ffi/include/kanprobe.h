#ifndef KANPROBE_H
#define KANPROBE_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum KpHeadKind {
  KP_HEAD_KIND_LINEAR = 0,
  KP_HEAD_KIND_KAN = 1,
} KpHeadKind;

typedef enum KpStatus {
  KP_STATUS_OK = 0,
  KP_STATUS_NULL_POINTER = 1,
  KP_STATUS_INVALID_ARGUMENT = 2,
  KP_STATUS_FORMAT = 3,
  KP_STATUS_IO = 4,
  KP_STATUS_RUNTIME = 5,
  KP_STATUS_PANIC = 6,
} KpStatus;

/**
 * Opaque feature dataset.
 */
typedef struct KpDataset KpDataset;

/**
 * Opaque trained or loaded probing head with its run metadata.
 */
typedef struct KpHead KpHead;

/**
 * Training settings; obtain defaults from `kp_train_config_default`.
 */
typedef struct KpTrainConfig {
  enum KpHeadKind head;
  size_t grid_size;
  size_t degree;
  double grid_lo;
  double grid_hi;
  double learning_rate;
  size_t batch_size;
  size_t max_epochs;
  size_t patience;
  uint64_t seed;
} KpTrainConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. Valid until
 * the next call into this library on the same thread.
 */
const char *kp_last_error_message(void);

/**
 * Defaults: KAN head, G=5, k=3, range [-2, 2], lr 0.001, batch 64,
 * 50 epochs, patience 10, seed 0.
 */
struct KpTrainConfig kp_train_config_default(void);

/**
 * Synthetic dataset; `kind` is "linear", "rings" or "additive_poly".
 *
 * # Safety
 * `kind` must be a NUL-terminated string and `out` a valid pointer.
 */
enum KpStatus kp_dataset_generate(const char *kind,
                                  size_t n,
                                  size_t d,
                                  size_t n_classes,
                                  double noise,
                                  uint64_t seed,
                                  struct KpDataset **out);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum KpStatus kp_dataset_load(const char *path, struct KpDataset **out);

/**
 * # Safety
 * `ds` must be a live dataset handle and `path` a NUL-terminated string.
 */
enum KpStatus kp_dataset_save(const struct KpDataset *ds, const char *path);

/**
 * New dataset with every split scaled by train-split mean and std.
 *
 * # Safety
 * `ds` must be a live dataset handle and `out` a valid pointer.
 */
enum KpStatus kp_dataset_standardize(const struct KpDataset *ds, struct KpDataset **out);

/**
 * Writes rows, feature dimension and class count; any pointer may be NULL.
 *
 * # Safety
 * `ds` must be a live dataset handle; non-NULL outputs must be valid.
 */
enum KpStatus kp_dataset_shape(const struct KpDataset *ds, size_t *n, size_t *d, size_t *n_classes);

/**
 * # Safety
 * `ds` must be NULL or a handle not yet freed.
 */
void kp_dataset_free(struct KpDataset *ds);

/**
 * Trains a head on the dataset as given and returns its best checkpoint.
 *
 * # Safety
 * `ds` must be a live dataset handle; `config` and `out` valid pointers.
 */
enum KpStatus kp_train(const struct KpDataset *ds,
                       const struct KpTrainConfig *config,
                       struct KpHead **out);

/**
 * Predicted class per row of a row-major `n_rows x n_cols` matrix.
 *
 * # Safety
 * `features` must hold `n_rows * n_cols` doubles and `out_labels`
 * `n_rows` entries.
 */
enum KpStatus kp_head_predict(const struct KpHead *head,
                              const double *features,
                              size_t n_rows,
                              size_t n_cols,
                              size_t *out_labels);

/**
 * Mean cross-entropy and accuracy on a split (0 train, 1 val, 2 test,
 * -1 all rows).
 *
 * # Safety
 * Handles must be live; `loss` and `accuracy` valid pointers.
 */
enum KpStatus kp_head_evaluate(const struct KpHead *head,
                               const struct KpDataset *ds,
                               int32_t split,
                               double *loss,
                               double *accuracy);

/**
 * Trainable parameter count, or 0 for NULL.
 *
 * # Safety
 * `head` must be NULL or a live handle.
 */
size_t kp_head_param_count(const struct KpHead *head);

/**
 * Best-epoch validation loss and 1-based epoch recorded for the head.
 *
 * # Safety
 * `head` must be a live handle; outputs valid pointers or NULL.
 */
enum KpStatus kp_head_best(const struct KpHead *head, double *best_val_loss, size_t *best_epoch);

/**
 * # Safety
 * `head` must be a live handle and `path` a NUL-terminated string.
 */
enum KpStatus kp_head_save(const struct KpHead *head, const char *path);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum KpStatus kp_head_load(const char *path, struct KpHead **out);

/**
 * # Safety
 * `head` must be NULL or a handle not yet freed.
 */
void kp_head_free(struct KpHead *head);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KANPROBE_H */
