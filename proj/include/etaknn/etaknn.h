/* C interface to the etaknn library. All functions return an etaknn_status;
 * on failure etaknn_last_error() describes the problem for the calling
 * thread. Objects are opaque and released with their *_free function. */
#ifndef ETAKNN_ETAKNN_H
#define ETAKNN_ETAKNN_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define ETAKNN_API __declspec(dllexport)
#else
#define ETAKNN_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum etaknn_status {
  ETAKNN_OK = 0,
  ETAKNN_ERR_PARSE = 1,
  ETAKNN_ERR_INTEGRITY = 2,
  ETAKNN_ERR_RANGE = 3,
  ETAKNN_ERR_PARAMETER = 4,
  ETAKNN_ERR_FIT = 5,
  ETAKNN_ERR_SPLIT = 6,
  ETAKNN_ERR_CONFIG = 7,
  ETAKNN_ERR_SCHEMA = 8,
  ETAKNN_ERR_TRAINING = 9,
  ETAKNN_ERR_CORRUPT_FILE = 10,
  ETAKNN_ERR_VERSION = 11,
  ETAKNN_ERR_METRIC = 12,
  ETAKNN_ERR_IO = 13,
  ETAKNN_ERR_GENERATION = 14,
  ETAKNN_ERR_INVALID_ARGUMENT = 15,
  ETAKNN_ERR_INTERNAL = 16
} etaknn_status;

typedef enum etaknn_role {
  ETAKNN_ROLE_TRAIN = 0, /* folds over the training days */
  ETAKNN_ROLE_TEST = 1   /* held-out days, support = all training days */
} etaknn_role;

typedef struct etaknn_config etaknn_config;
typedef struct etaknn_dataset etaknn_dataset;
typedef struct etaknn_matrix etaknn_matrix;
typedef struct etaknn_model etaknn_model;

ETAKNN_API const char* etaknn_version(void);
ETAKNN_API const char* etaknn_status_name(etaknn_status status);
/* Message of the last failed call on this thread; "" if none. */
ETAKNN_API const char* etaknn_last_error(void);
/* Releases strings returned through char** out-parameters. */
ETAKNN_API void etaknn_string_free(char* s);

/* Receives warnings (level 1) and progress notes (level 0). Passing NULL
 * restores the default stderr sink. */
typedef void (*etaknn_log_fn)(int level, const char* message, void* user);
ETAKNN_API void etaknn_set_log_callback(etaknn_log_fn fn, void* user);

/* ---- configuration ---- */
ETAKNN_API etaknn_status etaknn_config_default(etaknn_config** out);
ETAKNN_API etaknn_status etaknn_config_load(const char* path, etaknn_config** out);
ETAKNN_API etaknn_status etaknn_config_parse(const char* json, etaknn_config** out);
ETAKNN_API etaknn_status etaknn_config_set_seed(etaknn_config* cfg, uint64_t seed);
ETAKNN_API etaknn_status etaknn_config_to_json(const etaknn_config* cfg, char** out);
ETAKNN_API void etaknn_config_free(etaknn_config* cfg);

/* ---- synthetic cities ---- */
typedef struct etaknn_synth_spec {
  size_t n_nodes;
  size_t n_edges;
  size_t n_supersegments;
  int n_days;
  int steps_per_day;
  double counter_fraction;
  double missing_rate;
  int congestion_regimes;
  double noise_std;
  uint64_t seed;
  int n_regions;
  double day_jitter;
  double flow_noise_rel;
  double eta_missing_rate;
} etaknn_synth_spec;

ETAKNN_API void etaknn_synth_spec_default(etaknn_synth_spec* spec);
/* Generates a city and writes it as a dataset directory. */
ETAKNN_API etaknn_status etaknn_synth_write(const etaknn_synth_spec* spec,
                                            const char* out_dir);

/* ---- datasets ---- */
typedef struct etaknn_dataset_info {
  size_t n_nodes;
  size_t n_edges;
  size_t n_supersegments;
  size_t n_counters;
  int n_days;
  int steps_per_day;
  size_t observed_flows;
  size_t observed_etas;
} etaknn_dataset_info;

/* flows_path may be NULL to read flows.csv from the directory. */
ETAKNN_API etaknn_status etaknn_dataset_load(const char* dir, const char* flows_path,
                                             etaknn_dataset** out);
ETAKNN_API etaknn_status etaknn_dataset_info_get(const etaknn_dataset* ds,
                                                 etaknn_dataset_info* out);
/* Returns ETAKNN_ERR_INTEGRITY with the first violation as the message. */
ETAKNN_API etaknn_status etaknn_dataset_validate(const etaknn_dataset* ds,
                                                 size_t* n_violations);
ETAKNN_API void etaknn_dataset_free(etaknn_dataset* ds);

/* Imputes the training days (all days when all_days is non-zero), writes the
 * flow panel to flows_out and, if report_out is not NULL, a JSON fit report.
 * The dataset's flows are replaced by the imputed panel. */
ETAKNN_API etaknn_status etaknn_impute(etaknn_dataset* ds, const etaknn_config* cfg,
                                       int all_days, const char* flows_out,
                                       const char* report_out);

/* ---- feature matrices ---- */
ETAKNN_API etaknn_status etaknn_build_features(const etaknn_dataset* ds,
                                               const etaknn_config* cfg,
                                               etaknn_role role, etaknn_matrix** out);
ETAKNN_API etaknn_status etaknn_matrix_save(const etaknn_matrix* m, const char* path);
ETAKNN_API etaknn_status etaknn_matrix_load(const char* path, etaknn_matrix** out);
ETAKNN_API etaknn_status etaknn_matrix_shape(const etaknn_matrix* m, size_t* rows,
                                             size_t* cols);
ETAKNN_API void etaknn_matrix_free(etaknn_matrix* m);

/* ---- models ---- */
ETAKNN_API etaknn_status etaknn_train(const etaknn_matrix* m, const etaknn_config* cfg,
                                      etaknn_model** out);
ETAKNN_API etaknn_status etaknn_model_save(const etaknn_model* model, const char* path);
ETAKNN_API etaknn_status etaknn_model_load(const char* path, etaknn_model** out);
ETAKNN_API etaknn_status etaknn_model_save_training_log(const etaknn_model* model,
                                                        const char* path);
ETAKNN_API etaknn_status etaknn_model_n_trees(const etaknn_model* model, size_t* out);
/* Writes one prediction per matrix row into out[0..n). */
ETAKNN_API etaknn_status etaknn_predict(const etaknn_model* model, const etaknn_matrix* m,
                                        double* out, size_t n);
ETAKNN_API etaknn_status etaknn_predict_to_file(const etaknn_model* model,
                                                const etaknn_matrix* m, const char* path);
/* Feature importances ranked by gain share. name stays valid while the
 * model lives. */
ETAKNN_API etaknn_status etaknn_model_importance_count(const etaknn_model* model,
                                                       size_t* out);
ETAKNN_API etaknn_status etaknn_model_importance(const etaknn_model* model, size_t index,
                                                 const char** name, double* share);
ETAKNN_API void etaknn_model_free(etaknn_model* model);

/* ---- evaluation ---- */
ETAKNN_API etaknn_status etaknn_evaluate_files(const char* pred_path,
                                               const char* truth_path, double* mae);
/* Runs the comparison table. spec_path may be NULL for the reference
 * eight-row layout; the CSV goes to out_csv. */
ETAKNN_API etaknn_status etaknn_ablate(const etaknn_dataset* ds, const etaknn_config* cfg,
                                       const char* spec_path, const char* out_csv);

#ifdef __cplusplus
}
#endif

#endif /* ETAKNN_ETAKNN_H */
