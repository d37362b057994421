#ifndef SLCOLM_H
#define SLCOLM_H

/* Generated by cbindgen; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes for every fallible FFI call.
 */
typedef enum {
  SLCOLM_STATUS_OK = 0,
  /**
   * A required pointer was null or an argument was out of range.
   */
  SLCOLM_STATUS_INVALID_ARGUMENT = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  SLCOLM_STATUS_INVALID_UTF8 = 2,
  /**
   * Reading or writing a file failed.
   */
  SLCOLM_STATUS_IO = 3,
  /**
   * A JSON argument did not match the expected shape.
   */
  SLCOLM_STATUS_INVALID_JSON = 4,
  /**
   * Validation inside the pipeline rejected the input.
   */
  SLCOLM_STATUS_REJECTED = 5,
} SlcolmStatus;

/**
 * Opaque relation schema handle.
 */
typedef struct SlcolmSchema SlcolmSchema;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent failure on this thread, or null.
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *slcolm_last_error(void);

/**
 * Load a relation schema from a JSON file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
SlcolmStatus slcolm_schema_load(const char *path, SlcolmSchema **out);

/**
 * The built-in demo schema.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
SlcolmStatus slcolm_schema_demo(SlcolmSchema **out);

/**
 * Release a schema handle. Null is a no-op.
 *
 * # Safety
 * `schema` must have come from a `slcolm_schema_*` constructor.
 */
void slcolm_schema_free(SlcolmSchema *schema);

/**
 * Release a string returned by this library. Null is a no-op.
 *
 * # Safety
 * `s` must have been returned by a `slcolm_*` function.
 */
void slcolm_string_free(char *s);

/**
 * Parse raw model output into entities, triples, and an explanation.
 * `out_json` receives the full parsed answer:
 * `{"sample_id", "explanation", "entities", "triples", "raw", "warnings"}`.
 *
 * # Safety
 * All pointers must be valid; strings NUL-terminated.
 */
SlcolmStatus slcolm_parse_output(const SlcolmSchema *schema,
                                 const char *sample_id,
                                 const char *raw,
                                 char **out_json);

/**
 * Fuse SLM and LLM triples for one sample.
 *
 * `y_star_json`: `[{"head","relation","tail","prob"}]` (prob as decimal
 * string or number). `y_prime_json`: `[{"head","relation","tail"}]`.
 * `worst_set_json`: JSON array of relation names; required for mode 3, may
 * be null otherwise. `out_json` receives
 * `[{"head","relation","tail","source"}]` sorted by triple.
 *
 * # Safety
 * All pointers must be valid; strings NUL-terminated.
 */
SlcolmStatus slcolm_merge_triples(uint8_t mode,
                                  double prob_threshold,
                                  const char *worst_set_json,
                                  const char *y_star_json,
                                  const char *y_prime_json,
                                  char **out_json);

/**
 * Score predictions against gold triples.
 *
 * `pred_json`: `{"<sample id>": [{"head","relation","tail"}]}`.
 * `gold_json`: `[{"id", "triples": [...]}]`. `out_json` receives the full
 * evaluation report (micro/macro P/R/F1 and per-relation counts).
 *
 * # Safety
 * All pointers must be valid; strings NUL-terminated.
 */
SlcolmStatus slcolm_score_triples(const char *pred_json, const char *gold_json, char **out_json);

/**
 * Character-bigram cosine similarity of two texts, in [0, 1].
 *
 * # Safety
 * All pointers must be valid; strings NUL-terminated.
 */
SlcolmStatus slcolm_text_similarity(const char *a, const char *b, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SLCOLM_H */
