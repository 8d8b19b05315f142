#ifndef LEXSEQ_H
#define LEXSEQ_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum LexseqStatus {
  LEXSEQ_STATUS_OK = 0,
  LEXSEQ_STATUS_NULL_POINTER = 1,
  LEXSEQ_STATUS_INVALID_ARGUMENT = 2,
  LEXSEQ_STATUS_FORMAT_ERROR = 3,
  LEXSEQ_STATUS_IO_ERROR = 4,
  LEXSEQ_STATUS_EMPTY_POOL = 5,
  LEXSEQ_STATUS_ALPHABET_MISMATCH = 6,
  LEXSEQ_STATUS_PANIC = 7,
} LexseqStatus;

/**
 * Opaque corpus handle.
 */
typedef struct LexseqDataset LexseqDataset;

/**
 * Opaque handle to a fitted mixture of Markov chains.
 */
typedef struct LexseqLmm LexseqLmm;

/**
 * Opaque handle to a trained expert pool.
 */
typedef struct LexseqPool LexseqPool;

/**
 * Training settings for [`lexseq_pool_train`]. `d` is the history
 * length; trees are capped at depth `d + 1`, and `d < 0` means unbounded.
 */
typedef struct LexseqTrainParams {
  size_t r;
  double b;
  int64_t d;
  double eta0;
  size_t epochs;
  size_t outer_iters;
  uint64_t seed;
  /**
   * Nonzero appends a single-expert model trained on all data.
   */
  uint8_t augment;
} LexseqTrainParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf` (always
 * NUL-terminated when `len > 0`) and returns the full message length in
 * bytes, excluding the terminator.
 */
size_t lexseq_last_error_message(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *lexseq_version(void);

/**
 * Draws the two-type synthetic corpus. `labels` may be null; otherwise it
 * must hold `m` bytes and receives each sequence's hidden type (1 or 2).
 */
enum LexseqStatus lexseq_dataset_generate(size_t k,
                                          size_t m,
                                          size_t t,
                                          uint64_t seed,
                                          uint8_t *labels,
                                          struct LexseqDataset **out);

/**
 * Builds a corpus over `1..=k` from `count` sequences stored back to back
 * in `symbols`, with lengths in `lengths`.
 */
enum LexseqStatus lexseq_dataset_from_symbols(size_t k,
                                              const uint32_t *symbols,
                                              const size_t *lengths,
                                              size_t count,
                                              struct LexseqDataset **out);

/**
 * Loads an encoded or raw corpus file.
 */
enum LexseqStatus lexseq_dataset_load(const char *path, struct LexseqDataset **out);

enum LexseqStatus lexseq_dataset_save(const struct LexseqDataset *ds, const char *path);

/**
 * Number of sequences (0 for null).
 */
size_t lexseq_dataset_len(const struct LexseqDataset *ds);

/**
 * Alphabet size (0 for null).
 */
size_t lexseq_dataset_k(const struct LexseqDataset *ds);

/**
 * Length of sequence `i`, or 0 when out of range.
 */
size_t lexseq_dataset_seq_len(const struct LexseqDataset *ds, size_t i);

void lexseq_dataset_free(struct LexseqDataset *ds);

/**
 * The harness defaults.
 */
struct LexseqTrainParams lexseq_train_params_default(void);

/**
 * Trains a pool of `params.r` experts (plus one when `augment` is set).
 */
enum LexseqStatus lexseq_pool_train(const struct LexseqDataset *ds,
                                    const struct LexseqTrainParams *params,
                                    struct LexseqPool **out);

/**
 * Loads a pool manifest (expert files are resolved beside it).
 */
enum LexseqStatus lexseq_pool_load(const char *path, struct LexseqPool **out);

enum LexseqStatus lexseq_pool_save(const struct LexseqPool *pool, const char *path);

/**
 * Number of experts (0 for null).
 */
size_t lexseq_pool_len(const struct LexseqPool *pool);

/**
 * Alphabet size (0 for null).
 */
size_t lexseq_pool_k(const struct LexseqPool *pool);

/**
 * Next-symbol prediction of expert `expert` (0-based) after `prefix`.
 */
enum LexseqStatus lexseq_pool_expert_predict(const struct LexseqPool *pool,
                                             size_t expert,
                                             const uint32_t *prefix,
                                             size_t len,
                                             uint32_t *out);

void lexseq_pool_free(struct LexseqPool *pool);

/**
 * Runs Weighted Majority in expected mode over one sequence.
 * `eta < 0` selects the fixed rate `sqrt(log r / T)`. Any output pointer
 * may be null.
 */
enum LexseqStatus lexseq_wm_run(const struct LexseqPool *pool,
                                const uint32_t *x,
                                size_t len,
                                double eta,
                                double *avg_loss,
                                double *best_expert_loss,
                                double *regret_bound);

/**
 * Mean online accuracy of the pool over a corpus, using the harness's
 * default Weighted Majority settings.
 */
enum LexseqStatus lexseq_pool_evaluate(const struct LexseqPool *pool,
                                       const struct LexseqDataset *ds,
                                       double *accuracy);

/**
 * Fits an `r`-component mixture of order-`d` Markov chains by EM.
 */
enum LexseqStatus lexseq_lmm_fit(const struct LexseqDataset *ds,
                                 size_t r,
                                 size_t d,
                                 double alpha,
                                 uint64_t seed,
                                 struct LexseqLmm **out);

enum LexseqStatus lexseq_lmm_load(const char *path, struct LexseqLmm **out);

enum LexseqStatus lexseq_lmm_save(const struct LexseqLmm *model, const char *path);

/**
 * MAP next-symbol prediction after `prefix`.
 */
enum LexseqStatus lexseq_lmm_predict(const struct LexseqLmm *model,
                                     const uint32_t *prefix,
                                     size_t len,
                                     uint32_t *out);

/**
 * Mean online MAP accuracy over a corpus.
 */
enum LexseqStatus lexseq_lmm_evaluate(const struct LexseqLmm *model,
                                      const struct LexseqDataset *ds,
                                      double *accuracy);

void lexseq_lmm_free(struct LexseqLmm *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LEXSEQ_H */
