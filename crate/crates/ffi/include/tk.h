/* C interface to the thurston-kit sphere-covering toolkit. */

#ifndef THURSTON_KIT_FFI_H
#define THURSTON_KIT_FFI_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code returned by every fallible call.
 */
typedef enum TkStatus {
  TK_STATUS_OK = 0,
  /**
   * The input was well-formed but mathematically unusable.
   */
  TK_STATUS_DOMAIN_ERROR = 1,
  /**
   * Malformed JSON, word, or angle syntax.
   */
  TK_STATUS_PARSE_ERROR = 2,
  TK_STATUS_NULL_ARGUMENT = 3,
  TK_STATUS_INVALID_UTF8 = 4,
  /**
   * An internal invariant failed; the handle remains usable.
   */
  TK_STATUS_PANIC = 5,
} TkStatus;

/**
 * A validated self-covering of a marked sphere (opaque).
 */
typedef struct TkCover TkCover;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread (empty after a
 * success).  The pointer is valid until the next library call on the
 * same thread.
 */
const char *tk_last_error_message(void);

/**
 * Releases a string returned through a `char **` out-parameter.
 *
 * # Safety
 * `s` must have been produced by this library and not freed before.
 */
void tk_string_free(char *s);

/**
 * Parses and validates a self-covering from its JSON description
 * (`{"punctures": [...], "degree": d, "generators": [{"perm": [...],
 * "lifts": [...]}, ...]}`) and writes a handle to `out`.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum TkStatus tk_cover_parse(const char *json, struct TkCover **out);

/**
 * Releases a cover handle.
 *
 * # Safety
 * `cover` must come from [`tk_cover_parse`] and not be freed twice.
 */
void tk_cover_free(struct TkCover *cover);

/**
 * Writes the covering degree to `out`.
 *
 * # Safety
 * `cover` must be a live handle; `out` must be writable.
 */
enum TkStatus tk_cover_degree(const struct TkCover *cover, size_t *out);

/**
 * Writes the number of marked points to `out`.
 *
 * # Safety
 * `cover` must be a live handle; `out` must be writable.
 */
enum TkStatus tk_cover_puncture_count(const struct TkCover *cover, size_t *out);

/**
 * Writes the cover back out in its canonical JSON form.
 *
 * # Safety
 * `cover` must be a live handle; `out` receives a string for
 * [`tk_string_free`].
 */
enum TkStatus tk_cover_to_json(const struct TkCover *cover, char **out);

/**
 * Writes the validation report: degree, puncture labels, portrait, and
 * peripheral cycle designations.
 *
 * # Safety
 * `cover` must be a live handle; `out` receives a string for
 * [`tk_string_free`].
 */
enum TkStatus tk_cover_validation_json(const struct TkCover *cover, char **out);

/**
 * Writes the orbifold summary: weights, signature, Euler characteristic
 * (exact, as a string), and type.
 *
 * # Safety
 * `cover` must be a live handle; `out` receives a string for
 * [`tk_string_free`].
 */
enum TkStatus tk_cover_orbifold_json(const struct TkCover *cover, char **out);

/**
 * Writes the preimage components of the free-homotopy class of `word`
 * (a string such as `"x1x2"`), with their degrees and sheet supports.
 *
 * # Safety
 * `cover` must be a live handle; `word` must be NUL-terminated; `out`
 * receives a string for [`tk_string_free`].
 */
enum TkStatus tk_cover_pullback_class_json(const struct TkCover *cover,
                                           const char *word,
                                           char **out);

/**
 * Writes the transition matrix of a multicurve (JSON `{"sphere":
 * [...], "curves": [...]}`) together with a certified spectral-radius
 * enclosure.
 *
 * # Safety
 * `cover` must be a live handle; `multicurve_json` must be
 * NUL-terminated; `out` receives a string for [`tk_string_free`].
 */
enum TkStatus tk_cover_transition_json(const struct TkCover *cover,
                                       const char *multicurve_json,
                                       char **out);

/**
 * Runs the obstruction search with the given budget (saturation
 * iterations per seed, largest accumulated system) over the default
 * seeds and writes the verdict.
 *
 * # Safety
 * `cover` must be a live handle; `out` receives a string for
 * [`tk_string_free`].
 */
enum TkStatus tk_cover_obstruction_json(const struct TkCover *cover,
                                        uint32_t max_iterations,
                                        uint32_t max_classes,
                                        char **out);

/**
 * Cuts the cover along an invariant multicurve (JSON `{"sphere": [...],
 * "curves": [...]}`, regions inferred from the curve words) and writes
 * the resulting gluing manifest, the exact input of [`tk_combine_json`].
 *
 * # Safety
 * `cover` must be a live handle; `multicurve_json` must be
 * NUL-terminated; `out` receives a string for [`tk_string_free`].
 */
enum TkStatus tk_cover_decompose_json(const struct TkCover *cover,
                                      const char *multicurve_json,
                                      char **out);

/**
 * Assembles a self-covering from a gluing manifest and writes it in the
 * canonical cover JSON form, ready for [`tk_cover_parse`].
 *
 * # Safety
 * `manifest_json` must be NUL-terminated; `out` receives a string for
 * [`tk_string_free`].
 */
enum TkStatus tk_combine_json(const char *manifest_json, char **out);

/**
 * Runs the pullback iteration for a quadratic external angle `p/q` from
 * the standard start (or, with `has_seed`, a seeded random admissible
 * start) and writes the verdict: converged with the recovered
 * parameter, degenerate with the shrinking classes, or indeterminate.
 *
 * # Safety
 * `angle` must be NUL-terminated; `out` receives a string for
 * [`tk_string_free`].
 */
enum TkStatus tk_spider_run_json(const char *angle,
                                 uint32_t max_steps,
                                 bool has_seed,
                                 uint64_t seed,
                                 char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* THURSTON_KIT_FFI_H */
