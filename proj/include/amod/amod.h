/* C API of the amod dispatch laboratory.
 *
 * All functions that can fail return an amod_status; on failure a
 * human-readable message is available from amod_last_error() until the next
 * call on the same thread. Objects are opaque handles owned by the caller and
 * released with the matching _destroy function. Strings returned through
 * char** out-parameters are heap-allocated and released with
 * amod_string_free().
 */
#ifndef AMOD_AMOD_H
#define AMOD_AMOD_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define AMOD_API __declspec(dllexport)
#else
#define AMOD_API __attribute__((visibility("default")))
#endif

typedef enum amod_status {
  AMOD_OK = 0,
  AMOD_ERROR_INVALID_ARGUMENT = 1,
  AMOD_ERROR_IO = 2,
  AMOD_ERROR_RUNTIME = 3
} amod_status;

typedef struct amod_context amod_context;
typedef struct amod_graph amod_graph;
typedef struct amod_env amod_env;

AMOD_API const char* amod_version(void);

/* Message describing the most recent failure on the calling thread; empty
 * string if there has been none. */
AMOD_API const char* amod_last_error(void);

AMOD_API void amod_string_free(char* text);

/* ---- Experiment context: configuration plus run options ---------------- */

/* Loads a config file (pass NULL for an all-defaults context) and applies
 * AMOD_* environment overrides. */
AMOD_API amod_status amod_context_create(const char* config_path, amod_context** out);
AMOD_API void amod_context_destroy(amod_context* context);

/* Overrides one dotted config key, e.g. "training.alpha" = "0.3". */
AMOD_API amod_status amod_context_set(amod_context* context, const char* key,
                                      const char* value);

AMOD_API amod_status amod_context_set_out_dir(amod_context* context, const char* dir);
AMOD_API amod_status amod_context_add_seed(amod_context* context, uint64_t seed);

/* Comma-separated subset of "greedy,mpc,rl" for the compare subcommand. */
AMOD_API amod_status amod_context_set_policies(amod_context* context, const char* list);
AMOD_API amod_status amod_context_set_verbose(amod_context* context, int verbose);

/* Runs one subcommand: "ingest", "estimate", "train", "evaluate", "compare",
 * "kl-sweep", or "bench-runtime". Progress lines go to stdout. */
AMOD_API amod_status amod_run(amod_context* context, const char* subcommand);

/* ---- Zone graph primitives --------------------------------------------- */

AMOD_API amod_status amod_graph_load(const char* path, amod_graph** out);
AMOD_API amod_status amod_graph_from_json(const char* json_text, amod_graph** out);
AMOD_API void amod_graph_destroy(amod_graph* graph);

AMOD_API int amod_graph_node_count(const amod_graph* graph);
AMOD_API int amod_graph_travel_time(const amod_graph* graph, int u, int v);
AMOD_API double amod_graph_distance_km(const amod_graph* graph, int u, int v);

/* ---- Matching primitive ------------------------------------------------- */

/* Input: {"num_requests": R, "num_vehicles": K, "edges": [{"request": i,
 * "vehicle": j, "weight": w}, ...]} with finite weights > 0. Output:
 * {"pairs": [[i, j], ...], "total_weight": w}. */
AMOD_API amod_status amod_matching_solve(const char* graph_json, char** result_json);

/* ---- Environment primitives -------------------------------------------- */

/* Fresh episode: fleet placed uniformly at random from the seed, clock at 0,
 * no open requests. */
AMOD_API amod_status amod_env_create(const amod_graph* graph, int fleet_size,
                                     int horizon, int max_wait, double revenue_rate,
                                     double cost_rate, uint64_t seed, amod_env** out);
AMOD_API void amod_env_destroy(amod_env* env);

/* Places a request at the current step; it is decided by the next step call. */
AMOD_API amod_status amod_env_add_request(amod_env* env, int origin, int destination);

/* Applies the per-request action vector (-1 rejects, otherwise a vehicle
 * index), advances the dynamics one step, and reports the step profit. */
AMOD_API amod_status amod_env_step(amod_env* env, const int* action, int action_length,
                                   double* profit_out);

AMOD_API int amod_env_time(const amod_env* env);
AMOD_API double amod_env_total_profit(const amod_env* env);

/* Current state as JSON (time, open requests, fleet) for inspection. */
AMOD_API amod_status amod_env_state_json(const amod_env* env, char** state_json);

#ifdef __cplusplus
}
#endif

#endif /* AMOD_AMOD_H */
