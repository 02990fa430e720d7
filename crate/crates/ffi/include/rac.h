#ifndef RAC_H
#define RAC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RacMode {
  RAC_MODE_PAPER = 0,
  RAC_MODE_DENSE = 1,
  RAC_MODE_PUNCTURED = 2,
} RacMode;

typedef enum RacStatus {
  RAC_STATUS_OK = 0,
  RAC_STATUS_NULL_POINTER = 1,
  RAC_STATUS_INVALID_ARGUMENT = 2,
  RAC_STATUS_NOT_TRIDIVISIBLE = 3,
  /**
   * A randomized stage gave up; the result handle (if any) names the stage.
   */
  RAC_STATUS_STAGE_ABORT = 4,
  RAC_STATUS_PARSE = 5,
  RAC_STATUS_INTERNAL = 6,
  RAC_STATUS_PANIC = 7,
} RacStatus;

/**
 * Opaque graph.
 */
typedef struct RacGraph RacGraph;

/**
 * Opaque pipeline result.
 */
typedef struct RacResult RacResult;

/**
 * Pipeline parameters; obtain defaults from [`rac_config_default`].
 */
typedef struct RacConfig {
  enum RacMode mode;
  /**
   * Fraction of template triangles removed in punctured mode.
   */
  double epsilon;
  uint64_t seed;
  uint32_t max_retries;
  uint32_t budget;
  double c;
} RacConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread; empty if none. Valid until
 * the next failing call on the same thread.
 */
const char *rac_last_error_message(void);

/**
 * Library version, static storage.
 */
const char *rac_version(void);

struct RacConfig rac_config_default(void);

/**
 * Empty graph on `n` vertices.
 */
struct RacGraph *rac_graph_new(size_t n);

struct RacGraph *rac_graph_complete(size_t n);

/**
 * Parses the `n m` / `u v` edge-list text format.
 *
 * # Safety
 * `text` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum RacStatus rac_graph_parse(const char *text, struct RacGraph **out);

/**
 * # Safety
 * `g` must come from this library and not be used afterwards; null is ignored.
 */
void rac_graph_free(struct RacGraph *g);

/**
 * Adds `uv`; adding an existing edge is not an error.
 *
 * # Safety
 * `g` must be a valid graph handle.
 */
enum RacStatus rac_graph_add_edge(struct RacGraph *g, uint32_t u, uint32_t v);

/**
 * # Safety
 * `g` must be a valid graph handle.
 */
size_t rac_graph_vertex_count(const struct RacGraph *g);

/**
 * # Safety
 * `g` must be a valid graph handle.
 */
size_t rac_graph_edge_count(const struct RacGraph *g);

/**
 * # Safety
 * `g` must be a valid graph handle.
 */
bool rac_graph_is_tridivisible(const struct RacGraph *g);

/**
 * Runs the pipeline. On `RAC_STATUS_OK` and `RAC_STATUS_STAGE_ABORT` a
 * result handle is stored in `out`; on other failures `out` is untouched.
 *
 * # Safety
 * `g`, `cfg` and `out` must be valid pointers.
 */
enum RacStatus rac_decompose(const struct RacGraph *g,
                             const struct RacConfig *cfg,
                             struct RacResult **out);

/**
 * # Safety
 * `r` must come from this library and not be used afterwards; null is ignored.
 */
void rac_result_free(struct RacResult *r);

/**
 * True when the run produced a verified decomposition.
 *
 * # Safety
 * `r` must be a valid result handle.
 */
bool rac_result_ok(const struct RacResult *r);

/**
 * Number of triangles in the decomposition (0 after an abort).
 *
 * # Safety
 * `r` must be a valid result handle.
 */
size_t rac_result_triangle_count(const struct RacResult *r);

/**
 * Copies up to `cap` triangles as consecutive vertex triples into `buf`
 * (which holds `3 * cap` entries) and returns the number copied.
 *
 * # Safety
 * `r` must be a valid result handle and `buf` valid for `3 * cap` writes.
 */
size_t rac_result_triangles(const struct RacResult *r, uint32_t *buf, size_t cap);

/**
 * The full result as JSON, owned by the handle.
 *
 * # Safety
 * `r` must be a valid result handle.
 */
const char *rac_result_json(const struct RacResult *r);

/**
 * Checks that `count` triangles (`3 * count` vertex ids) partition the edges of `g`.
 *
 * # Safety
 * `g` and `out` must be valid; `tris` must hold `3 * count` entries.
 */
enum RacStatus rac_verify_decomposition(const struct RacGraph *g,
                                        const uint32_t *tris,
                                        size_t count,
                                        bool *out);

/**
 * Exact count of Steiner triple systems on `n` labelled points
 * (`allow_large` unlocks `9 < n <= 15`).
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum RacStatus rac_count_sts(size_t n, bool allow_large, uint64_t *out);

/**
 * Divisibility conditions for `(n, q, r, lambda)` designs.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum RacStatus rac_design_divisibility(uint64_t n,
                                       uint64_t q,
                                       uint64_t r,
                                       uint64_t lambda,
                                       bool *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RAC_H */
