/* Drives the shared library through its C header only. */
#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>
#include <sys/stat.h>

#include "etaknn/etaknn.h"

static int failures = 0;

#define EXPECT(cond)                                                 \
  do {                                                               \
    if (!(cond)) {                                                   \
      fprintf(stderr, "%s:%d: check failed: %s (last error: %s)\n", \
              __FILE__, __LINE__, #cond, etaknn_last_error());       \
      ++failures;                                                    \
    }                                                                \
  } while (0)

#define MUST(call)                                                   \
  do {                                                               \
    etaknn_status s_ = (call);                                       \
    if (s_ != ETAKNN_OK) {                                           \
      fprintf(stderr, "%s:%d: %s returned %s: %s\n", __FILE__,      \
              __LINE__, #call, etaknn_status_name(s_),               \
              etaknn_last_error());                                  \
      exit(1);                                                       \
    }                                                                \
  } while (0)

static char paths[8][1024];

static const char* in_dir(int slot, const char* dir, const char* name) {
  snprintf(paths[slot], sizeof paths[slot], "%s/%s", dir, name);
  return paths[slot];
}

static int warnings_seen = 0;

static void on_log(int level, const char* message, void* user) {
  (void)message;
  (void)user;
  if (level == 1) ++warnings_seen;
}

int main(int argc, char** argv) {
  const char* work = argc > 1 ? argv[1] : "capi_work";
  mkdir(work, 0755);
  etaknn_set_log_callback(on_log, NULL);

  EXPECT(strlen(etaknn_version()) > 0);
  EXPECT(strcmp(etaknn_status_name(ETAKNN_ERR_SCHEMA), "schema") == 0);

  /* Generate and load a small city. */
  etaknn_synth_spec spec;
  etaknn_synth_spec_default(&spec);
  EXPECT(spec.n_days == 14 && spec.steps_per_day == 96);
  spec.n_nodes = 40;
  spec.n_edges = 90;
  spec.n_supersegments = 4;
  spec.counter_fraction = 0.2;
  spec.missing_rate = 0.2;
  spec.seed = 11;
  const char* data = in_dir(0, work, "city");
  MUST(etaknn_synth_write(&spec, data));

  etaknn_dataset* ds = NULL;
  MUST(etaknn_dataset_load(data, NULL, &ds));
  etaknn_dataset_info info;
  MUST(etaknn_dataset_info_get(ds, &info));
  EXPECT(info.n_supersegments == 4);
  EXPECT(info.n_days == 14);
  EXPECT(info.n_counters > 0);
  EXPECT(info.observed_flows < info.n_counters * 14 * 96);
  size_t violations = 99;
  MUST(etaknn_dataset_validate(ds, &violations));
  EXPECT(violations == 0);

  etaknn_config* cfg = NULL;
  MUST(etaknn_config_parse("{\"gbdt\": {\"n_trees\": 40, \"n_leaves\": 16}}", &cfg));
  MUST(etaknn_config_set_seed(cfg, 3));
  char* text = NULL;
  MUST(etaknn_config_to_json(cfg, &text));
  EXPECT(strstr(text, "\"n_trees\": 40") != NULL || strstr(text, "\"n_trees\":40") != NULL);
  etaknn_string_free(text);

  /* Impute, features, train, predict, evaluate. */
  const char* imputed = in_dir(1, work, "imputed.csv");
  MUST(etaknn_impute(ds, cfg, 0, imputed, in_dir(2, work, "report.json")));
  MUST(etaknn_dataset_info_get(ds, &info));
  EXPECT(info.observed_flows >= info.n_counters * 11 * 96);

  etaknn_matrix *train_m = NULL, *test_m = NULL;
  MUST(etaknn_build_features(ds, cfg, ETAKNN_ROLE_TRAIN, &train_m));
  MUST(etaknn_build_features(ds, cfg, ETAKNN_ROLE_TEST, &test_m));
  size_t rows = 0, cols = 0;
  MUST(etaknn_matrix_shape(test_m, &rows, &cols));
  EXPECT(rows == 3 * 96 * 4);
  EXPECT(cols > 0);

  const char* mpath = in_dir(3, work, "train.csv");
  MUST(etaknn_matrix_save(train_m, mpath));
  etaknn_matrix* reloaded = NULL;
  MUST(etaknn_matrix_load(mpath, &reloaded));
  size_t r2 = 0, c2 = 0, r1 = 0, c1 = 0;
  MUST(etaknn_matrix_shape(train_m, &r1, &c1));
  MUST(etaknn_matrix_shape(reloaded, &r2, &c2));
  EXPECT(r1 == r2 && c1 == c2);

  etaknn_model* model = NULL;
  MUST(etaknn_train(reloaded, cfg, &model));
  size_t n_trees = 0;
  MUST(etaknn_model_n_trees(model, &n_trees));
  EXPECT(n_trees > 0 && n_trees <= 40);

  size_t n_imp = 0;
  double total = 0.0;
  MUST(etaknn_model_importance_count(model, &n_imp));
  for (size_t i = 0; i < n_imp; ++i) {
    const char* name = NULL;
    double share = 0.0;
    MUST(etaknn_model_importance(model, i, &name, &share));
    EXPECT(name != NULL && share >= 0.0);
    total += share;
  }
  EXPECT(fabs(total - 1.0) <= 1e-9);
  EXPECT(etaknn_model_importance(model, n_imp, NULL, NULL) == ETAKNN_ERR_RANGE);

  double* preds = malloc(rows * sizeof *preds);
  MUST(etaknn_predict(model, test_m, preds, rows));
  for (size_t i = 0; i < rows; ++i) EXPECT(preds[i] >= 1.0 && preds[i] <= 3600.0);
  EXPECT(etaknn_predict(model, test_m, preds, rows - 1) == ETAKNN_ERR_INVALID_ARGUMENT);

  const char* model_path = in_dir(4, work, "model.json");
  MUST(etaknn_model_save(model, model_path));
  MUST(etaknn_model_save_training_log(model, in_dir(5, work, "train_log.csv")));
  etaknn_model* loaded = NULL;
  MUST(etaknn_model_load(model_path, &loaded));
  double* again = malloc(rows * sizeof *again);
  MUST(etaknn_predict(loaded, test_m, again, rows));
  EXPECT(memcmp(preds, again, rows * sizeof *preds) == 0);

  const char* pred_path = in_dir(6, work, "pred.csv");
  MUST(etaknn_predict_to_file(loaded, test_m, pred_path));
  double mae = -1.0;
  MUST(etaknn_evaluate_files(pred_path, in_dir(7, work, "city/etas.csv"), &mae));
  EXPECT(mae > 0.0 && mae < 200.0);
  printf("C API pipeline MAE: %.4f\n", mae);

  /* Error paths. */
  etaknn_dataset* none = NULL;
  EXPECT(etaknn_dataset_load(in_dir(0, work, "no_such_dir"), NULL, &none) != ETAKNN_OK);
  EXPECT(strlen(etaknn_last_error()) > 0);
  EXPECT(none == NULL);

  etaknn_config* bad = NULL;
  EXPECT(etaknn_config_parse("{\"gbdt\": {\"trees\": 5}}", &bad) == ETAKNN_ERR_CONFIG);
  EXPECT(strstr(etaknn_last_error(), "trees") != NULL);
  EXPECT(etaknn_config_parse("{not json", &bad) == ETAKNN_ERR_CONFIG);
  EXPECT(etaknn_config_default(NULL) == ETAKNN_ERR_INVALID_ARGUMENT);

  etaknn_synth_spec wrong = spec;
  wrong.missing_rate = 1.5;
  EXPECT(etaknn_synth_write(&wrong, in_dir(0, work, "wrong")) == ETAKNN_ERR_GENERATION);

  FILE* f = fopen(in_dir(0, work, "broken.json"), "w");
  fputs("{\"format\": \"etaknn-gbdt\", \"vers", f);
  fclose(f);
  etaknn_model* broken = NULL;
  EXPECT(etaknn_model_load(paths[0], &broken) == ETAKNN_ERR_CORRUPT_FILE);

  MUST(etaknn_model_n_trees(loaded, &n_trees));

  free(preds);
  free(again);
  etaknn_model_free(loaded);
  etaknn_model_free(model);
  etaknn_matrix_free(reloaded);
  etaknn_matrix_free(train_m);
  etaknn_matrix_free(test_m);
  etaknn_config_free(cfg);
  etaknn_dataset_free(ds);
  etaknn_dataset_free(NULL);
  etaknn_set_log_callback(NULL, NULL);

  if (failures) {
    fprintf(stderr, "%d check(s) failed\n", failures);
    return 1;
  }
  printf("C API checks passed (%d warnings logged)\n", warnings_seen);
  return 0;
}
