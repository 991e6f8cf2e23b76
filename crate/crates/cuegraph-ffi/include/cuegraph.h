#pragma once

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call in this API.
 */
typedef enum CgStatus {
  /**
   * The call succeeded.
   */
  CG_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  CG_STATUS_NULL_ARGUMENT = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  CG_STATUS_UTF8_ERROR = 2,
  /**
   * The operation failed; `cg_last_error()` has the message.
   */
  CG_STATUS_FAILURE = 3,
  /**
   * A panic was caught at the boundary; outputs were not written.
   */
  CG_STATUS_PANIC = 4,
} CgStatus;

/**
 * Opaque handle to a loaded or generated dataset manifest.
 */
typedef struct CgManifest CgManifest;

/**
 * Answers one cue query for [`cg_evaluate`]. `cue_index` follows canonical
 * cue order. Return 1 for yes, 0 for no, any negative value to abort the
 * evaluation with an error.
 */
typedef int32_t (*CgCueSource)(uint32_t cue_index, void *user_data);

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message from the most recent failing call on this thread, empty if none.
 *
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *cg_last_error(void);

/**
 * Library version as a static string; never freed by the caller.
 */
const char *cg_version(void);

/**
 * Release a string produced by this library. Null is a no-op.
 *
 * # Safety
 * `s` must have come from an out-parameter of this API and not have been
 * freed already.
 */
void cg_string_free(char *s);

/**
 * Number of cues in the graph. Valid cue indices are `0..cg_cue_count()`.
 */
uint32_t cg_cue_count(void);

/**
 * Static short name of a cue (`"OSAD"`, ...), or null for a bad index.
 */
const char *cg_cue_name(uint32_t cue_index);

/**
 * Static question text a detector answers for a cue, or null for a bad index.
 */
const char *cg_cue_question(uint32_t cue_index);

/**
 * Load a JSONL manifest from `path` into a fresh handle.
 *
 * # Safety
 * `path` must be a readable NUL-terminated string and `out` valid for writes.
 */
enum CgStatus cg_manifest_load(const char *path, struct CgManifest **out);

/**
 * Generate a synthetic manifest from generator-config JSON.
 *
 * # Safety
 * `config_json` must be a readable NUL-terminated string and `out` valid for
 * writes.
 */
enum CgStatus cg_manifest_generate(const char *config_json, struct CgManifest **out);

/**
 * Write a manifest back out as JSONL.
 *
 * # Safety
 * `manifest` must be a live handle from this API; `path` must be a readable
 * NUL-terminated string.
 */
enum CgStatus cg_manifest_save(const struct CgManifest *manifest, const char *path);

/**
 * Number of segments in the manifest.
 *
 * # Safety
 * `manifest` must be a live handle from this API; `out_len` must be valid
 * for writes.
 */
enum CgStatus cg_manifest_len(const struct CgManifest *manifest, uintptr_t *out_len);

/**
 * Check every manifest invariant. Returns `Ok` for a clean manifest;
 * otherwise `Failure` with the violations joined into the error message.
 * `out_violation_count` (optional) receives the number of violations either
 * way.
 *
 * # Safety
 * `manifest` must be a live handle from this API; `out_violation_count` must
 * be null or valid for writes.
 */
enum CgStatus cg_manifest_validate(const struct CgManifest *manifest,
                                   uintptr_t *out_violation_count);

/**
 * Copy the id of segment `index` into a caller-owned string.
 *
 * # Safety
 * `manifest` must be a live handle from this API; `out` must be valid for
 * writes.
 */
enum CgStatus cg_manifest_segment_id(const struct CgManifest *manifest,
                                     uintptr_t index,
                                     char **out);

/**
 * Read the consensus cues of segment `index` as a bitmask (bit `i` is cue
 * `i` in canonical order) plus its ground-truth interaction flag.
 *
 * # Safety
 * `manifest` must be a live handle from this API; `out_cue_bits` and
 * `out_ground_truth` must each be null or valid for writes.
 */
enum CgStatus cg_manifest_cues(const struct CgManifest *manifest,
                               uintptr_t index,
                               uint8_t *out_cue_bits,
                               bool *out_ground_truth);

/**
 * Release a manifest handle. Null is a no-op.
 *
 * # Safety
 * `manifest` must have come from this API and not have been freed already.
 */
void cg_manifest_free(struct CgManifest *manifest);

/**
 * Evaluate one segment by querying `source` under `policy` (`"EAGER"`,
 * `"SHORT_CIRCUIT"`, or `"HIERARCHICAL"`).
 *
 * `out_interacting`, `out_intervene_ok`, and `out_decision_json` are each
 * optional; `out_decision_json` receives the full decision (beliefs plus
 * query trace) as a caller-owned JSON string.
 *
 * # Safety
 * `segment_id` and `policy` must be readable NUL-terminated strings; each
 * out-parameter must be null or valid for writes; `source` must be callable
 * with `user_data` for the duration of the call.
 */
enum CgStatus cg_evaluate(const char *segment_id,
                          const char *policy,
                          CgCueSource source,
                          void *user_data,
                          bool *out_interacting,
                          bool *out_intervene_ok,
                          char **out_decision_json);

/**
 * [`cg_evaluate`] with cue answers taken from a bitmask instead of a
 * callback (bit `i` answers cue `i` in canonical order).
 *
 * # Safety
 * Same as [`cg_evaluate`] minus the callback.
 */
enum CgStatus cg_evaluate_bits(const char *segment_id,
                               const char *policy,
                               uint8_t cue_bits,
                               bool *out_interacting,
                               bool *out_intervene_ok,
                               char **out_decision_json);

/**
 * Intervention-timing metric: true-negative rate over non-interaction
 * segments. Fails when `false_positives + true_negatives` is zero.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum CgStatus cg_itm(uint64_t true_positives,
                     uint64_t false_positives,
                     uint64_t false_negatives,
                     uint64_t true_negatives,
                     double *out);

/**
 * Social-interaction metric: macro F1 over the two classes. Fails on an
 * empty matrix.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum CgStatus cg_sim(uint64_t true_positives,
                     uint64_t false_positives,
                     uint64_t false_negatives,
                     uint64_t true_negatives,
                     double *out);

/**
 * Parse a model's free-text reply to a yes/no question.
 *
 * # Safety
 * `text` must be a readable NUL-terminated string; `out` must be valid for
 * writes.
 */
enum CgStatus cg_parse_answer(const char *text, bool *out);

/**
 * Run a full experiment from experiment-config JSON (the same schema the
 * CLI's `run` command reads). Outputs land under the config's `output_dir`;
 * `out_report_json` receives the caller-owned metrics report.
 *
 * # Safety
 * `config_json` must be a readable NUL-terminated string; `out_report_json`
 * must be valid for writes.
 */
enum CgStatus cg_run_experiment(const char *config_json, char **out_report_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus
