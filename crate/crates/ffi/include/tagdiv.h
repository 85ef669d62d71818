#ifndef TAGDIV_H
#define TAGDIV_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TagdivStatus {
  TAGDIV_STATUS_OK = 0,
  TAGDIV_STATUS_NULL_POINTER = 1,
  TAGDIV_STATUS_INVALID_ARGUMENT = 2,
  TAGDIV_STATUS_VALIDATION = 3,
  TAGDIV_STATUS_LOOKUP = 4,
  TAGDIV_STATUS_SHAPE = 5,
  TAGDIV_STATUS_NUMERIC = 6,
  TAGDIV_STATUS_IO = 7,
  TAGDIV_STATUS_FORMAT = 8,
  TAGDIV_STATUS_BUFFER_TOO_SMALL = 9,
  TAGDIV_STATUS_PANIC = 10,
} TagdivStatus;

/**
 * Tag hierarchy and its semantic paths.
 */
typedef struct TagdivGraph TagdivGraph;

/**
 * DPP kernel: per-tag quality and a similarity matrix.
 */
typedef struct TagdivKernel TagdivKernel;

/**
 * Trained generator with its tag space.
 */
typedef struct TagdivModel TagdivModel;

/**
 * Weighted path-level precision, recall and F1.
 */
typedef struct TagdivPrf {
  double precision;
  double recall;
  double f1;
} TagdivPrf;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `cap`). Returns the full message length excluding the NUL.
 */
size_t tagdiv_last_error(char *buf, size_t cap);

/**
 * Loads a hierarchy file (`id<TAB>name|syn..<TAB>parent_id` per line).
 */
enum TagdivStatus tagdiv_graph_load(const char *path_utf8, struct TagdivGraph **out_graph);

void tagdiv_graph_free(struct TagdivGraph *graph);

enum TagdivStatus tagdiv_graph_num_tags(const struct TagdivGraph *graph, size_t *out_n);

enum TagdivStatus tagdiv_graph_num_paths(const struct TagdivGraph *graph, size_t *out_n);

/**
 * Resolves a canonical name or synonym to its tag id.
 */
enum TagdivStatus tagdiv_graph_lookup(const struct TagdivGraph *graph,
                                      const char *name_utf8,
                                      size_t *out_id);

enum TagdivStatus tagdiv_graph_tag_weight(const struct TagdivGraph *graph,
                                          size_t id,
                                          double *out_w);

/**
 * Stores 1 when the two tags lie on a common semantic path, else 0.
 */
enum TagdivStatus tagdiv_graph_shares_path(const struct TagdivGraph *graph,
                                           size_t a,
                                           size_t b,
                                           int32_t *out_shared);

/**
 * Builds a kernel from `m` nonnegative qualities and a row-major `m x m`
 * similarity matrix (symmetric, unit diagonal, entries in [0, 1]).
 */
enum TagdivStatus tagdiv_kernel_new(const double *quality,
                                    size_t m,
                                    const double *similarity,
                                    struct TagdivKernel **out_kernel);

void tagdiv_kernel_free(struct TagdivKernel *kernel);

/**
 * Probability of exactly `ids` under the unconstrained DPP.
 */
enum TagdivStatus tagdiv_kernel_subset_probability(const struct TagdivKernel *kernel,
                                                   const size_t *ids,
                                                   size_t n,
                                                   double *out_p);

/**
 * Draws `repeats` path-distinct subsets of at most `k` tags and writes the
 * heaviest one, in draw order. Deterministic in `seed`.
 */
enum TagdivStatus tagdiv_sample_best_of(const struct TagdivKernel *kernel,
                                        const struct TagdivGraph *graph,
                                        size_t k,
                                        size_t repeats,
                                        uint64_t seed,
                                        size_t *out_ids,
                                        size_t cap,
                                        size_t *out_len);

enum TagdivStatus tagdiv_semantic_prf(const struct TagdivGraph *graph,
                                      const size_t *ids,
                                      size_t n,
                                      const size_t *gt_paths,
                                      size_t n_gt,
                                      struct TagdivPrf *out_prf);

/**
 * Loads a tag space and the generator of a training checkpoint.
 */
enum TagdivStatus tagdiv_model_load(const char *hierarchy_utf8,
                                    const char *embeddings_utf8,
                                    const char *checkpoint_utf8,
                                    struct TagdivModel **out_model);

void tagdiv_model_free(struct TagdivModel *model);

enum TagdivStatus tagdiv_model_feature_dim(const struct TagdivModel *model, size_t *out_d);

/**
 * Tags one image: draws `n_noise` subsets of at most `k` tags, writes the
 * heaviest as the single subset and the union of the `top` heaviest as
 * the ensemble subset. Deterministic in `seed`.
 */
enum TagdivStatus tagdiv_model_annotate(const struct TagdivModel *model,
                                        const double *feature,
                                        size_t d,
                                        size_t n_noise,
                                        size_t k,
                                        size_t top,
                                        size_t repeats,
                                        uint64_t seed,
                                        size_t *out_single,
                                        size_t single_cap,
                                        size_t *out_single_len,
                                        size_t *out_ensemble,
                                        size_t ensemble_cap,
                                        size_t *out_ensemble_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TAGDIV_H */
