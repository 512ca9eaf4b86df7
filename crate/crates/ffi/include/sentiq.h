/* C interface to the sentiq subjective review-query engine.
 *
 * All functions returning SentiqStatus set a thread-local error message
 * readable via sentiq_last_error_message(). Strings returned through out
 * parameters are heap-allocated and must be released with
 * sentiq_string_free().
 */

#ifndef SENTIQ_H
#define SENTIQ_H

/* Generated by cbindgen from sentiq-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes mirroring the CLI exit codes.
 */
typedef enum SentiqStatus {
  /**
   * The call succeeded.
   */
  SENTIQ_STATUS_OK = 0,
  /**
   * A pointer argument was null or a string was not valid UTF-8.
   */
  SENTIQ_STATUS_INVALID_ARGUMENT = 1,
  /**
   * Input data, artifacts, configuration, or query text were unusable.
   */
  SENTIQ_STATUS_DATA_ERROR = 2,
  /**
   * An engine invariant failed.
   */
  SENTIQ_STATUS_INTERNAL_ERROR = 3,
} SentiqStatus;

/**
 * Opaque handle to a loaded database.
 */
typedef struct SentiqDb SentiqDb;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Open a database previously produced by `sentiq build`.
 *
 * `data_dir` holds the JSONL inputs; `build_dir` holds the artifacts and
 * may be null to use `<data_dir>/build`. `config_path` may be null for
 * default settings or point at a TOML settings file. On success `*out`
 * receives a handle that must be released with `sentiq_db_close`.
 *
 * # Safety
 * All pointer arguments must be null or valid per their descriptions, and
 * `out` must point to writable memory.
 */
enum SentiqStatus sentiq_db_open(const char *data_dir,
                                 const char *build_dir,
                                 const char *config_path,
                                 struct SentiqDb **out);

/**
 * Release a handle returned by `sentiq_db_open`. Null is a no-op.
 *
 * # Safety
 * `db` must be null or a handle from `sentiq_db_open` not yet closed.
 */
void sentiq_db_close(struct SentiqDb *db);

/**
 * Interpret one free-text predicate; `*out_json` receives the
 * interpretation (body, confidence, method) as a JSON document.
 *
 * # Safety
 * `db` must be a live handle; `predicate` a valid C string; `out_json`
 * writable.
 */
enum SentiqStatus sentiq_interpret_json(const struct SentiqDb *db,
                                        const char *predicate,
                                        char **out_json);

/**
 * Evaluate a query in the engine dialect and emit the ranked result
 * (entities, degrees, per-condition degrees, interpretations) as JSON.
 * `k` ≤ 0 means the configured default; `hard` nonzero switches to
 * hard-threshold semantics.
 *
 * # Safety
 * `db` must be a live handle; `sql` a valid C string; `out_json` writable.
 */
enum SentiqStatus sentiq_query_json(const struct SentiqDb *db,
                                    const char *sql,
                                    int32_t k,
                                    int32_t hard,
                                    char **out_json);

/**
 * Number of entities in the database, or -1 on a null handle.
 *
 * # Safety
 * `db` must be null or a live handle.
 */
int64_t sentiq_entity_count(const struct SentiqDb *db);

/**
 * The last error message recorded on this thread, or null when none.
 * The returned string must be released with `sentiq_string_free`.
 */
char *sentiq_last_error_message(void);

/**
 * Release a string returned by this library. Null is a no-op.
 *
 * # Safety
 * `s` must be null or a string obtained from this library, not yet freed.
 */
void sentiq_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SENTIQ_H */
