#ifndef GLOSS_H
#define GLOSS_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum GlossStatus {
  GLOSS_STATUS_OK = 0,
  GLOSS_STATUS_NULL_POINTER = 1,
  GLOSS_STATUS_INVALID_UTF8 = 2,
  GLOSS_STATUS_IO = 3,
  GLOSS_STATUS_BAD_FORMAT = 4,
  GLOSS_STATUS_INVALID_ARGUMENT = 5,
  GLOSS_STATUS_NOT_POSITIONAL = 6,
  GLOSS_STATUS_BUFFER_TOO_SMALL = 7,
  GLOSS_STATUS_INTERNAL = 8,
} GlossStatus;

/**
 * Opaque model handle.
 */
typedef struct GlossModel GlossModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL.
 */
const char *gloss_last_error(void);

/**
 * Loads a model file. On success `*out` owns a handle to release with
 * `gloss_model_free`.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum GlossStatus gloss_model_load(const char *path, struct GlossModel **out);

/**
 * Writes a model file, including stored latents.
 *
 * # Safety
 * `model` must come from `gloss_model_load`; `path` must be NUL-terminated.
 */
enum GlossStatus gloss_model_save(const struct GlossModel *model, const char *path);

/**
 * # Safety
 * `model` must be NULL or a handle not yet freed.
 */
void gloss_model_free(struct GlossModel *model);

/**
 * Latent dimensionality, or 0 for a NULL handle.
 *
 * # Safety
 * `model` must be NULL or a live handle.
 */
size_t gloss_model_dim(const struct GlossModel *model);

/**
 * Vocabulary size including the unknown token, or 0 for a NULL handle.
 *
 * # Safety
 * `model` must be NULL or a live handle.
 */
size_t gloss_model_vocab_size(const struct GlossModel *model);

/**
 * Number of stored training latents (0 if none were saved).
 *
 * # Safety
 * `model` must be NULL or a live handle.
 */
size_t gloss_model_num_latents(const struct GlossModel *model);

/**
 * 0 for bag-of-words, 1 for positional, -1 for a NULL handle.
 *
 * # Safety
 * `model` must be NULL or a live handle.
 */
int32_t gloss_model_kind(const struct GlossModel *model);

/**
 * Ball radius of the latent space, or 0 for a NULL handle.
 *
 * # Safety
 * `model` must be NULL or a live handle.
 */
double gloss_model_radius(const struct GlossModel *model);

/**
 * Copies stored training latent `index` into `out`.
 *
 * # Safety
 * `out` must hold `out_len` doubles.
 */
enum GlossStatus gloss_model_latent(const struct GlossModel *model,
                                    size_t index,
                                    double *out,
                                    size_t out_len);

/**
 * Embeds a sentence by optimizing a fresh latent against the frozen decoder.
 * `steps` = 250 and `lr` = 1.0 are the usual settings; a nonzero
 * `plain_sgd` replaces Adam with plain gradient descent.
 *
 * # Safety
 * `sentence` must be NUL-terminated; `out` must hold `out_len` doubles.
 */
enum GlossStatus gloss_embed(const struct GlossModel *model,
                             const char *sentence,
                             size_t steps,
                             double lr,
                             int32_t plain_sgd,
                             double *out,
                             size_t out_len);

/**
 * Cosine similarity of two `len`-vectors.
 *
 * # Safety
 * `a` and `b` must hold `len` doubles; `out` must be valid.
 */
enum GlossStatus gloss_cosine(const double *a, const double *b, size_t len, double *out);

/**
 * `(1-t)·src + t·tgt` projected onto the model's latent ball.
 *
 * # Safety
 * `src`, `tgt` and `out` must each hold `gloss_model_dim(model)` doubles.
 */
enum GlossStatus gloss_interpolate(const struct GlossModel *model,
                                   const double *src,
                                   const double *tgt,
                                   double t,
                                   double *out);

/**
 * Greedy decode of `length` tokens from latent `z` (positional models).
 * On success `*out` is a string to release with `gloss_string_free`.
 *
 * # Safety
 * `z` must hold `gloss_model_dim(model)` doubles; `out` must be valid.
 */
enum GlossStatus gloss_greedy_decode(const struct GlossModel *model,
                                     const double *z,
                                     size_t length,
                                     char **out);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library, freed once.
 */
void gloss_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GLOSS_H */
