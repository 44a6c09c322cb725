/* C interface to the activation lab. All functions are thread-safe with
   respect to distinct handles. Errors are reported as status codes; the
   message of the last failure on the calling thread is available from
   actlab_last_error(). */
#ifndef ACTLAB_ACTLAB_H
#define ACTLAB_ACTLAB_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(__GNUC__)
#define ACTLAB_API __attribute__((visibility("default")))
#else
#define ACTLAB_API
#endif

typedef enum actlab_status {
  ACTLAB_OK = 0,
  ACTLAB_INVALID_ARGUMENT,
  ACTLAB_SYNTAX_ERROR,
  ACTLAB_ARITY_ERROR,
  ACTLAB_NON_CONST_EXPONENT,
  ACTLAB_NON_FINITE_OUTPUT,
  ACTLAB_SHAPE_MISMATCH,
  ACTLAB_SHAPE_TOO_SMALL,
  ACTLAB_BAD_RANGE,
  ACTLAB_UNKNOWN_ACTIVATION,
  ACTLAB_UNKNOWN_EQUATION_ID,
  ACTLAB_DOMAIN_ERROR,
  ACTLAB_NOT_TRAINABLE,
  ACTLAB_SCHEMA_VERSION_MISMATCH,
  ACTLAB_HASH_MISMATCH,
  ACTLAB_IO_ERROR,
  ACTLAB_PROPOSER_TIMEOUT,
  ACTLAB_PROPOSER_PROTOCOL,
  ACTLAB_INTERNAL_ERROR
} actlab_status;

typedef struct actlab_expr actlab_expr;
typedef struct actlab_outcome actlab_outcome;

/* Called with one progress line (no trailing newline). */
typedef void (*actlab_line_fn)(const char* line, void* user);

ACTLAB_API const char* actlab_version(void);
ACTLAB_API const char* actlab_status_name(actlab_status status);
/* Message of the last failure on this thread; "" if none. */
ACTLAB_API const char* actlab_last_error(void);
/* Byte offset of the last syntax or arity error, or -1. */
ACTLAB_API int64_t actlab_last_error_position(void);

/* ---- expressions */
ACTLAB_API actlab_status actlab_expr_parse(const char* text, actlab_expr** out);
ACTLAB_API void actlab_expr_free(actlab_expr* expr);
/* Canonical text, owned by the handle and valid until it is freed. */
ACTLAB_API const char* actlab_expr_text(const actlab_expr* expr);
ACTLAB_API actlab_status actlab_expr_cost(const actlab_expr* expr, uint64_t* out);
ACTLAB_API actlab_status actlab_expr_depth(const actlab_expr* expr, size_t* out);
/* Evaluates on a rows x cols row-major batch; batch statistics cover the
   whole batch. */
ACTLAB_API actlab_status actlab_expr_eval(const actlab_expr* expr, const double* x, size_t rows,
                                          size_t cols, double* y);

/* ---- commands
   command: eval, evolve, sweep, histogram, export-dataset, replay, zoo-list.
   options_json: a JSON object (NULL for defaults). progress may be NULL.
   On success *out receives an outcome handle. */
ACTLAB_API actlab_status actlab_run(const char* command, const char* options_json,
                                    actlab_line_fn progress, void* user, actlab_outcome** out);
ACTLAB_API void actlab_outcome_free(actlab_outcome* outcome);
/* Plain-text report. */
ACTLAB_API const char* actlab_outcome_text(const actlab_outcome* outcome);
/* Run directory, or "" when nothing was written. */
ACTLAB_API const char* actlab_outcome_run_dir(const actlab_outcome* outcome);
/* The run record as JSON, or "null". */
ACTLAB_API const char* actlab_outcome_record(const actlab_outcome* outcome);
/* The options after defaults are applied, as JSON. The returned string is
   thread-local and valid until the next call on this thread. */
ACTLAB_API actlab_status actlab_normalize_options(const char* command, const char* options_json,
                                                  const char** out);

#ifdef __cplusplus
}
#endif

#endif
