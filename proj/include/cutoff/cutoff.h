/* C interface to the cutoff library. All functions report failure through a
 * cutoff_status; the message of the most recent failure on the calling thread
 * is available from cutoff_last_error(). */
#ifndef CUTOFF_CUTOFF_H
#define CUTOFF_CUTOFF_H

#include <stddef.h>
#include <stdint.h>

#if defined(CUTOFF_BUILDING_LIBRARY)
#define CUTOFF_API __attribute__((visibility("default")))
#else
#define CUTOFF_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cutoff_status {
  CUTOFF_OK = 0,
  CUTOFF_ERR_PARAMETER = 1,
  CUTOFF_ERR_CAPACITY = 2,
  CUTOFF_ERR_INDEX = 3,
  CUTOFF_ERR_SHAPE = 4,
  CUTOFF_ERR_UNSUPPORTED = 5,
  CUTOFF_ERR_UNREACHABLE = 6,
  CUTOFF_ERR_TIMEOUT = 7,
  CUTOFF_ERR_COVERAGE = 8,
  CUTOFF_ERR_FIT = 9,
  CUTOFF_ERR_AUDIT = 10,
  CUTOFF_ERR_UNDEFINED = 11,
  CUTOFF_ERR_IO = 12,
  CUTOFF_ERR_BUFFER = 13, /* caller buffer too small; required size reported */
  CUTOFF_ERR_NULL = 14,
  CUTOFF_ERR_INTERNAL = 99
} cutoff_status;

typedef struct cutoff_model cutoff_model;

CUTOFF_API const char* cutoff_last_error(void);
CUTOFF_API const char* cutoff_status_name(cutoff_status status);
/* Process exit code for a status: 0 ok, 2 budget-type failures, 1 otherwise. */
CUTOFF_API int cutoff_exit_code(cutoff_status status);

/* family is one of the names printed by the CLI, e.g. "EhrenfestUrn". */
CUTOFF_API cutoff_status cutoff_model_create(const char* family, size_t n, const char* const* param_keys,
                                             const double* param_values, size_t param_count, cutoff_model** out);
CUTOFF_API void cutoff_model_destroy(cutoff_model* model);

CUTOFF_API cutoff_status cutoff_model_state_count(const cutoff_model* model, size_t* out);
CUTOFF_API cutoff_status cutoff_model_size(const cutoff_model* model, size_t* out);
CUTOFF_API cutoff_status cutoff_model_default_start(const cutoff_model* model, size_t* out);

/* Copies at most `capacity` entries; *len receives the row length. */
CUTOFF_API cutoff_status cutoff_model_row(const cutoff_model* model, size_t state, size_t* targets, double* probs,
                                          size_t capacity, size_t* len);

CUTOFF_API cutoff_status cutoff_model_stationary(const cutoff_model* model, double* out, size_t len);

/* projection must hold state_count entries; *coarse must be destroyed by the caller. */
CUTOFF_API cutoff_status cutoff_model_lump(const cutoff_model* model, cutoff_model** coarse, size_t* projection,
                                           size_t len);

CUTOFF_API cutoff_status cutoff_evolve(const cutoff_model* model, const double* in, double* out, size_t len,
                                       size_t steps);
CUTOFF_API cutoff_status cutoff_tv_distance(const double* a, const double* b, size_t len, double* out);

CUTOFF_API cutoff_status cutoff_bd_hitting_moments(const cutoff_model* model, size_t from, size_t to, double* mean,
                                                   double* variance);
CUTOFF_API cutoff_status cutoff_linear_solve_hitting(const cutoff_model* model, size_t init, const size_t* targets,
                                                     size_t target_count, double* mean, double* variance);
/* samples must hold `replicas` entries. */
CUTOFF_API cutoff_status cutoff_mc_hitting(const cutoff_model* model, size_t init, const size_t* targets,
                                           size_t target_count, size_t replicas, uint64_t seed, uint64_t* samples);

/* Runs a CLI subcommand. seed_override and out_override may be NULL. */
CUTOFF_API cutoff_status cutoff_run(const char* subcommand, const char* config_path, const uint64_t* seed_override,
                                    const char* out_override);
/* Summary lines of the last successful cutoff_run on this thread. */
CUTOFF_API const char* cutoff_last_summary(void);

#ifdef __cplusplus
}
#endif

#endif
