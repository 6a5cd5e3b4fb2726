#include "etaknn/etaknn.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <new>
#include <sstream>
#include <string>

#include "json.hpp"

#include "etaknn/error.hpp"
#include "etaknn/features.hpp"
#include "etaknn/gbdt.hpp"
#include "etaknn/ingest.hpp"
#include "etaknn/log.hpp"
#include "etaknn/pipeline.hpp"
#include "etaknn/synthcity.hpp"

struct etaknn_config {
  etaknn::PipelineConfig cfg;
};

struct etaknn_dataset {
  etaknn::Dataset ds;
};

struct etaknn_matrix {
  etaknn::FeatureMatrix m;
};

struct etaknn_model {
  etaknn::GbdtModel model;
  std::vector<std::pair<std::string, double>> importance;
};

namespace {

thread_local std::string g_last_error;

etaknn_status status_of(etaknn::ErrorCode code) {
  using etaknn::ErrorCode;
  switch (code) {
    case ErrorCode::parse: return ETAKNN_ERR_PARSE;
    case ErrorCode::integrity: return ETAKNN_ERR_INTEGRITY;
    case ErrorCode::range: return ETAKNN_ERR_RANGE;
    case ErrorCode::parameter: return ETAKNN_ERR_PARAMETER;
    case ErrorCode::fit: return ETAKNN_ERR_FIT;
    case ErrorCode::split: return ETAKNN_ERR_SPLIT;
    case ErrorCode::config: return ETAKNN_ERR_CONFIG;
    case ErrorCode::schema: return ETAKNN_ERR_SCHEMA;
    case ErrorCode::training: return ETAKNN_ERR_TRAINING;
    case ErrorCode::corrupt_file: return ETAKNN_ERR_CORRUPT_FILE;
    case ErrorCode::version: return ETAKNN_ERR_VERSION;
    case ErrorCode::metric: return ETAKNN_ERR_METRIC;
    case ErrorCode::io: return ETAKNN_ERR_IO;
    case ErrorCode::generation: return ETAKNN_ERR_GENERATION;
  }
  return ETAKNN_ERR_INTERNAL;
}

etaknn_status set_error(etaknn_status s, std::string msg) {
  g_last_error = std::move(msg);
  return s;
}

template <typename Fn>
etaknn_status guarded(Fn&& fn) {
  try {
    g_last_error.clear();
    fn();
    return ETAKNN_OK;
  } catch (const etaknn::Error& e) {
    return set_error(status_of(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return set_error(ETAKNN_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(ETAKNN_ERR_INTERNAL, e.what());
  } catch (...) {
    return set_error(ETAKNN_ERR_INTERNAL, "unknown failure");
  }
}

#define ETAKNN_REQUIRE(cond, what)                                   \
  do {                                                               \
    if (!(cond)) return set_error(ETAKNN_ERR_INVALID_ARGUMENT, what); \
  } while (0)

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

int train_days_of(const etaknn::PipelineConfig& cfg, const etaknn::Dataset& ds) {
  return ds.time.n_days() - etaknn::held_out_days(ds.time, cfg.test_fraction);
}

std::string impute_report_json(const etaknn::ImputeReport& r) {
  nlohmann::json windows = nlohmann::json::array();
  for (const auto& w : r.windows) {
    nlohmann::json j = {{"counter", w.counter},
                        {"start", w.start},
                        {"end", w.end},
                        {"n_observed", w.n_observed},
                        {"fitted", w.fitted}};
    if (w.fitted) {
      j["l1"] = w.l1;
      j["l2"] = w.l2;
      j["noise"] = w.noise;
      j["log_likelihood"] = w.log_likelihood;
    }
    if (!w.note.empty()) j["note"] = w.note;
    windows.push_back(std::move(j));
  }
  nlohmann::json out = {{"cells_imputed", r.cells_imputed},
                        {"warnings", r.warnings},
                        {"windows", windows}};
  return out.dump(2);
}

}  // namespace

extern "C" {

const char* etaknn_version(void) { return "0.1.0"; }

const char* etaknn_status_name(etaknn_status status) {
  switch (status) {
    case ETAKNN_OK: return "ok";
    case ETAKNN_ERR_PARSE: return "parse";
    case ETAKNN_ERR_INTEGRITY: return "integrity";
    case ETAKNN_ERR_RANGE: return "range";
    case ETAKNN_ERR_PARAMETER: return "parameter";
    case ETAKNN_ERR_FIT: return "fit";
    case ETAKNN_ERR_SPLIT: return "split";
    case ETAKNN_ERR_CONFIG: return "config";
    case ETAKNN_ERR_SCHEMA: return "schema";
    case ETAKNN_ERR_TRAINING: return "training";
    case ETAKNN_ERR_CORRUPT_FILE: return "corrupt-file";
    case ETAKNN_ERR_VERSION: return "version";
    case ETAKNN_ERR_METRIC: return "metric";
    case ETAKNN_ERR_IO: return "io";
    case ETAKNN_ERR_GENERATION: return "generation";
    case ETAKNN_ERR_INVALID_ARGUMENT: return "invalid-argument";
    case ETAKNN_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* etaknn_last_error(void) { return g_last_error.c_str(); }

void etaknn_string_free(char* s) { std::free(s); }

void etaknn_set_log_callback(etaknn_log_fn fn, void* user) {
  if (!fn) {
    etaknn::reset_log_sink();
    return;
  }
  etaknn::set_log_sink([fn, user](etaknn::LogLevel level, std::string_view msg) {
    const std::string text(msg);
    fn(level == etaknn::LogLevel::warning ? 1 : 0, text.c_str(), user);
  });
}

// ---------------------------------------------------------------- config --

etaknn_status etaknn_config_default(etaknn_config** out) {
  ETAKNN_REQUIRE(out, "out is NULL");
  return guarded([&] { *out = new etaknn_config{etaknn::PipelineConfig::defaults()}; });
}

etaknn_status etaknn_config_load(const char* path, etaknn_config** out) {
  ETAKNN_REQUIRE(path && out, "path or out is NULL");
  return guarded([&] { *out = new etaknn_config{etaknn::load_config(path)}; });
}

etaknn_status etaknn_config_parse(const char* json, etaknn_config** out) {
  ETAKNN_REQUIRE(json && out, "json or out is NULL");
  return guarded([&] { *out = new etaknn_config{etaknn::parse_config(json)}; });
}

etaknn_status etaknn_config_set_seed(etaknn_config* cfg, uint64_t seed) {
  ETAKNN_REQUIRE(cfg, "config is NULL");
  cfg->cfg.seed = seed;
  return ETAKNN_OK;
}

etaknn_status etaknn_config_to_json(const etaknn_config* cfg, char** out) {
  ETAKNN_REQUIRE(cfg && out, "config or out is NULL");
  return guarded([&] { *out = dup_string(etaknn::dump_config(cfg->cfg)); });
}

void etaknn_config_free(etaknn_config* cfg) { delete cfg; }

// ----------------------------------------------------------------- synth --

void etaknn_synth_spec_default(etaknn_synth_spec* spec) {
  if (!spec) return;
  const etaknn::SynthSpec d;
  spec->n_nodes = d.n_nodes;
  spec->n_edges = d.n_edges;
  spec->n_supersegments = d.n_supersegments;
  spec->n_days = d.n_days;
  spec->steps_per_day = d.steps_per_day;
  spec->counter_fraction = d.counter_fraction;
  spec->missing_rate = d.missing_rate;
  spec->congestion_regimes = d.congestion_regimes;
  spec->noise_std = d.noise_std;
  spec->seed = d.seed;
  spec->n_regions = d.n_regions;
  spec->day_jitter = d.day_jitter;
  spec->flow_noise_rel = d.flow_noise_rel;
  spec->eta_missing_rate = d.eta_missing_rate;
}

etaknn_status etaknn_synth_write(const etaknn_synth_spec* spec, const char* out_dir) {
  ETAKNN_REQUIRE(spec && out_dir, "spec or out_dir is NULL");
  return guarded([&] {
    etaknn::SynthSpec s;
    s.n_nodes = spec->n_nodes;
    s.n_edges = spec->n_edges;
    s.n_supersegments = spec->n_supersegments;
    s.n_days = spec->n_days;
    s.steps_per_day = spec->steps_per_day;
    s.counter_fraction = spec->counter_fraction;
    s.missing_rate = spec->missing_rate;
    s.congestion_regimes = spec->congestion_regimes;
    s.noise_std = spec->noise_std;
    s.seed = spec->seed;
    s.n_regions = spec->n_regions;
    s.day_jitter = spec->day_jitter;
    s.flow_noise_rel = spec->flow_noise_rel;
    s.eta_missing_rate = spec->eta_missing_rate;
    etaknn::save_dataset(etaknn::generate(s).dataset, out_dir);
  });
}

// --------------------------------------------------------------- dataset --

etaknn_status etaknn_dataset_load(const char* dir, const char* flows_path,
                                  etaknn_dataset** out) {
  ETAKNN_REQUIRE(dir && out, "dir or out is NULL");
  return guarded([&] {
    *out = new etaknn_dataset{
        etaknn::load_dataset(dir, flows_path ? std::filesystem::path(flows_path)
                                             : std::filesystem::path())};
  });
}

etaknn_status etaknn_dataset_info_get(const etaknn_dataset* ds, etaknn_dataset_info* out) {
  ETAKNN_REQUIRE(ds && out, "dataset or out is NULL");
  const auto& d = ds->ds;
  out->n_nodes = d.graph.nodes().size();
  out->n_edges = d.graph.edges().size();
  out->n_supersegments = d.graph.supersegments().size();
  out->n_counters = d.flows.counter_ids.size();
  out->n_days = d.time.n_days();
  out->steps_per_day = d.time.steps_per_day();
  out->observed_flows = d.flows.data.count_valid();
  out->observed_etas = d.etas.data.count_valid();
  return ETAKNN_OK;
}

etaknn_status etaknn_dataset_validate(const etaknn_dataset* ds, size_t* n_violations) {
  ETAKNN_REQUIRE(ds, "dataset is NULL");
  const auto report = etaknn::validate_dataset(ds->ds.graph, ds->ds.flows,
                                               ds->ds.etas, ds->ds.time);
  if (n_violations) *n_violations = report.violations.size();
  if (!report.ok()) {
    return set_error(ETAKNN_ERR_INTEGRITY, report.violations.front().message);
  }
  g_last_error.clear();
  return ETAKNN_OK;
}

void etaknn_dataset_free(etaknn_dataset* ds) { delete ds; }

etaknn_status etaknn_impute(etaknn_dataset* ds, const etaknn_config* cfg, int all_days,
                            const char* flows_out, const char* report_out) {
  ETAKNN_REQUIRE(ds && cfg && flows_out, "dataset, config or flows_out is NULL");
  return guarded([&] {
    etaknn::ImputeReport report;
    etaknn::FlowPanel filled =
        all_days ? etaknn::impute_panel(ds->ds.flows, cfg->cfg.gp, &report)
                 : etaknn::impute_training_flows(cfg->cfg, ds->ds, &report);
    for (const auto& w : report.warnings) etaknn::log_warning(w);
    etaknn::save_flow_panel(filled, flows_out);
    if (report_out) {
      std::ofstream out(report_out);
      if (!out) {
        etaknn::fail(etaknn::ErrorCode::io,
                     std::string("cannot open '") + report_out + "' for writing");
      }
      out << impute_report_json(report) << '\n';
    }
    ds->ds.flows = std::move(filled);
  });
}

// ---------------------------------------------------------------- matrix --

etaknn_status etaknn_build_features(const etaknn_dataset* ds, const etaknn_config* cfg,
                                    etaknn_role role, etaknn_matrix** out) {
  ETAKNN_REQUIRE(ds && cfg && out, "dataset, config or out is NULL");
  ETAKNN_REQUIRE(role == ETAKNN_ROLE_TRAIN || role == ETAKNN_ROLE_TEST, "unknown role");
  return guarded([&] {
    const auto& d = ds->ds;
    cfg->cfg.validate();
    const int train_days = train_days_of(cfg->cfg, d);
    if (role == ETAKNN_ROLE_TRAIN) {
      const std::size_t first_test = static_cast<std::size_t>(train_days) *
                                     static_cast<std::size_t>(d.time.steps_per_day());
      *out = new etaknn_matrix{etaknn::build_training_matrix(
          cfg->cfg, d.graph, d.flows, etaknn::mask_from(d.etas, first_test), d.time,
          train_days)};
    } else {
      *out = new etaknn_matrix{etaknn::build_test_matrix(cfg->cfg, d, d.flows, train_days)};
    }
  });
}

etaknn_status etaknn_matrix_save(const etaknn_matrix* m, const char* path) {
  ETAKNN_REQUIRE(m && path, "matrix or path is NULL");
  return guarded([&] { etaknn::save_matrix(m->m, path); });
}

etaknn_status etaknn_matrix_load(const char* path, etaknn_matrix** out) {
  ETAKNN_REQUIRE(path && out, "path or out is NULL");
  return guarded([&] { *out = new etaknn_matrix{etaknn::load_matrix(path)}; });
}

etaknn_status etaknn_matrix_shape(const etaknn_matrix* m, size_t* rows, size_t* cols) {
  ETAKNN_REQUIRE(m, "matrix is NULL");
  if (rows) *rows = m->m.n_rows();
  if (cols) *cols = m->m.n_cols();
  return ETAKNN_OK;
}

void etaknn_matrix_free(etaknn_matrix* m) { delete m; }

// ----------------------------------------------------------------- model --

etaknn_status etaknn_train(const etaknn_matrix* m, const etaknn_config* cfg,
                           etaknn_model** out) {
  ETAKNN_REQUIRE(m && cfg && out, "matrix, config or out is NULL");
  return guarded([&] {
    auto* model = new etaknn_model{etaknn::train(m->m, etaknn::stage_gbdt_config(cfg->cfg)), {}};
    model->importance = etaknn::feature_importance(model->model);
    *out = model;
  });
}

etaknn_status etaknn_model_save(const etaknn_model* model, const char* path) {
  ETAKNN_REQUIRE(model && path, "model or path is NULL");
  return guarded([&] { etaknn::save_model(model->model, path); });
}

etaknn_status etaknn_model_load(const char* path, etaknn_model** out) {
  ETAKNN_REQUIRE(path && out, "path or out is NULL");
  return guarded([&] {
    auto* model = new etaknn_model{etaknn::load_model(path), {}};
    model->importance = etaknn::feature_importance(model->model);
    *out = model;
  });
}

etaknn_status etaknn_model_save_training_log(const etaknn_model* model, const char* path) {
  ETAKNN_REQUIRE(model && path, "model or path is NULL");
  return guarded([&] { etaknn::save_training_log(model->model, path); });
}

etaknn_status etaknn_model_n_trees(const etaknn_model* model, size_t* out) {
  ETAKNN_REQUIRE(model && out, "model or out is NULL");
  *out = model->model.trees.size();
  return ETAKNN_OK;
}

etaknn_status etaknn_predict(const etaknn_model* model, const etaknn_matrix* m,
                             double* out, size_t n) {
  ETAKNN_REQUIRE(model && m && out, "model, matrix or out is NULL");
  ETAKNN_REQUIRE(n == m->m.n_rows(), "output length differs from the row count");
  return guarded([&] {
    const auto preds = etaknn::predict(model->model, m->m);
    std::copy(preds.begin(), preds.end(), out);
  });
}

etaknn_status etaknn_predict_to_file(const etaknn_model* model, const etaknn_matrix* m,
                                     const char* path) {
  ETAKNN_REQUIRE(model && m && path, "model, matrix or path is NULL");
  return guarded([&] {
    const auto preds = etaknn::predict(model->model, m->m);
    std::vector<etaknn::LongCell> cells;
    cells.reserve(preds.size());
    for (std::size_t r = 0; r < preds.size(); ++r) {
      cells.push_back({m->m.keys[r].step, m->m.keys[r].supersegment, preds[r]});
    }
    etaknn::save_prediction_cells(cells, path);
  });
}

etaknn_status etaknn_model_importance_count(const etaknn_model* model, size_t* out) {
  ETAKNN_REQUIRE(model && out, "model or out is NULL");
  *out = model->importance.size();
  return ETAKNN_OK;
}

etaknn_status etaknn_model_importance(const etaknn_model* model, size_t index,
                                      const char** name, double* share) {
  ETAKNN_REQUIRE(model, "model is NULL");
  if (index >= model->importance.size()) {
    return set_error(ETAKNN_ERR_RANGE, "importance index out of range");
  }
  if (name) *name = model->importance[index].first.c_str();
  if (share) *share = model->importance[index].second;
  return ETAKNN_OK;
}

void etaknn_model_free(etaknn_model* model) { delete model; }

// ------------------------------------------------------------ evaluation --

etaknn_status etaknn_evaluate_files(const char* pred_path, const char* truth_path,
                                    double* mae) {
  ETAKNN_REQUIRE(pred_path && truth_path && mae, "path or out is NULL");
  return guarded([&] {
    *mae = etaknn::mae(etaknn::load_long_cells(pred_path),
                       etaknn::load_long_cells(truth_path));
  });
}

etaknn_status etaknn_ablate(const etaknn_dataset* ds, const etaknn_config* cfg,
                            const char* spec_path, const char* out_csv) {
  ETAKNN_REQUIRE(ds && cfg && out_csv, "dataset, config or out_csv is NULL");
  return guarded([&] {
    etaknn::AblationSpec spec;
    if (spec_path) {
      std::ifstream in(spec_path);
      if (!in) {
        etaknn::fail(etaknn::ErrorCode::io,
                     std::string("cannot open '") + spec_path + "'");
      }
      std::stringstream ss;
      ss << in.rdbuf();
      spec = etaknn::parse_ablation_spec(ss.str());
    } else {
      spec = etaknn::AblationSpec::reference_table();
    }
    const auto results = etaknn::run_ablation(spec, cfg->cfg, ds->ds);
    std::ofstream out(out_csv);
    if (!out) {
      etaknn::fail(etaknn::ErrorCode::io,
                   std::string("cannot open '") + out_csv + "' for writing");
    }
    out << etaknn::ablation_csv(results);
    out.flush();
    if (!out) etaknn::fail(etaknn::ErrorCode::io, "failed writing the ablation table");
  });
}

}  // extern "C"
