// Command-line front end. Talks to the library through the C interface only.
#include <cstdio>
#include <memory>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "etaknn/etaknn.h"

namespace {

struct Failure {
  etaknn_status status;
};

void check(etaknn_status s) {
  if (s != ETAKNN_OK) throw Failure{s};
}

template <typename T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using ConfigPtr = std::unique_ptr<etaknn_config, Deleter<etaknn_config, etaknn_config_free>>;
using DatasetPtr = std::unique_ptr<etaknn_dataset, Deleter<etaknn_dataset, etaknn_dataset_free>>;
using MatrixPtr = std::unique_ptr<etaknn_matrix, Deleter<etaknn_matrix, etaknn_matrix_free>>;
using ModelPtr = std::unique_ptr<etaknn_model, Deleter<etaknn_model, etaknn_model_free>>;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "Pipeline configuration (JSON)")
      ->check(CLI::ExistingFile);
  sub->add_option("--seed", c.seed, "Root seed; overrides the configuration");
}

ConfigPtr make_config(const Common& c) {
  etaknn_config* raw = nullptr;
  check(c.config.empty() ? etaknn_config_default(&raw)
                         : etaknn_config_load(c.config.c_str(), &raw));
  ConfigPtr cfg(raw);
  if (c.seed) check(etaknn_config_set_seed(cfg.get(), *c.seed));
  return cfg;
}

DatasetPtr load_dataset(const std::string& dir, const std::string& flows) {
  etaknn_dataset* raw = nullptr;
  check(etaknn_dataset_load(dir.c_str(), flows.empty() ? nullptr : flows.c_str(), &raw));
  return DatasetPtr(raw);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Travel-time prediction from loop-counter similarity features"};
  app.require_subcommand(1);
  app.set_version_flag("--version", etaknn_version());

  // synth
  etaknn_synth_spec spec;
  etaknn_synth_spec_default(&spec);
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic city dataset");
  synth->add_option("--out", synth_out, "Output dataset directory")->required();
  synth->add_option("--seed", spec.seed, "Generator seed");
  synth->add_option("--days", spec.n_days, "Number of days");
  synth->add_option("--nodes", spec.n_nodes, "Number of nodes");
  synth->add_option("--edges", spec.n_edges, "Number of directed edges");
  synth->add_option("--supersegments", spec.n_supersegments, "Number of supersegments");
  synth->add_option("--counter-fraction", spec.counter_fraction,
                    "Share of nodes carrying a loop counter");
  synth->add_option("--missing-rate", spec.missing_rate,
                    "Probability that a counter reading is missing");
  synth->add_option("--eta-missing-rate", spec.eta_missing_rate,
                    "Probability that a travel time is missing");
  synth->add_option("--regimes", spec.congestion_regimes, "Number of day types");
  synth->add_option("--noise-std", spec.noise_std, "Travel-time noise (seconds)");

  // impute
  Common impute_c;
  std::string impute_data, impute_in, impute_out, impute_report;
  bool impute_all = false;
  auto* impute = app.add_subcommand("impute", "Fill flow gaps with the GP imputer");
  impute->add_option("--data", impute_data, "Dataset directory")->required();
  impute->add_option("--in", impute_in, "Flow panel to impute (default: <data>/flows.csv)");
  impute->add_option("--out", impute_out, "Imputed flow panel")->required();
  impute->add_option("--report", impute_report, "Per-window fit report (JSON)");
  impute->add_flag("--all-days", impute_all,
                   "Also impute the held-out days (training days only by default)");
  add_common(impute, impute_c);

  // build-features
  Common feat_c;
  std::string feat_data, feat_flows, feat_out, feat_role = "train";
  auto* feat = app.add_subcommand("build-features", "Build a feature matrix");
  feat->add_option("--data", feat_data, "Dataset directory")->required();
  feat->add_option("--in", feat_flows, "Flow panel (default: <data>/flows.csv)");
  feat->add_option("--role", feat_role, "train or test")
      ->check(CLI::IsMember({"train", "test"}));
  feat->add_option("--out", feat_out, "Matrix CSV; a .json sidecar is written next to it")
      ->required();
  add_common(feat, feat_c);

  // train
  Common train_c;
  std::string train_in, train_out, train_log;
  auto* trn = app.add_subcommand("train", "Train the gradient-boosted model");
  trn->add_option("--in", train_in, "Training matrix CSV")->required();
  trn->add_option("--out", train_out, "Model file (JSON)")->required();
  trn->add_option("--log", train_log, "Training curve CSV (round,train_mae)");
  add_common(trn, train_c);

  // predict
  std::string pred_model, pred_in, pred_out;
  auto* pred = app.add_subcommand("predict", "Predict travel times for a matrix");
  pred->add_option("--model", pred_model, "Model file")->required();
  pred->add_option("--in", pred_in, "Feature matrix CSV")->required();
  pred->add_option("--out", pred_out, "Predictions CSV")->required();

  // evaluate
  std::string eval_pred, eval_truth;
  auto* eval = app.add_subcommand("evaluate", "Mean absolute error of predictions");
  eval->add_option("--pred", eval_pred, "Predictions CSV")->required();
  eval->add_option("--truth", eval_truth, "Ground-truth travel times CSV")->required();

  // ablate
  Common abl_c;
  std::string abl_data, abl_flows, abl_spec, abl_out;
  auto* abl = app.add_subcommand("ablate", "Run the configuration comparison table");
  abl->add_option("--data", abl_data, "Dataset directory")->required();
  abl->add_option("--in", abl_flows, "Flow panel (default: <data>/flows.csv)");
  abl->add_option("--spec", abl_spec,
                  "Rows as split,flow_metric,y_metrics,n_trees,n_leaves (default: "
                  "the eight reference rows)");
  abl->add_option("--out", abl_out, "Comparison CSV")->required();
  add_common(abl, abl_c);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "etaknn: %s\n", e.what());
    std::fprintf(stderr, "%s", app.help().c_str());
    return 2;
  }

  try {
    if (synth->parsed()) {
      check(etaknn_synth_write(&spec, synth_out.c_str()));
      std::printf("wrote synthetic city to %s\n", synth_out.c_str());
    } else if (impute->parsed()) {
      auto cfg = make_config(impute_c);
      auto ds = load_dataset(impute_data, impute_in);
      check(etaknn_impute(ds.get(), cfg.get(), impute_all ? 1 : 0, impute_out.c_str(),
                          impute_report.empty() ? nullptr : impute_report.c_str()));
      std::printf("wrote imputed flows to %s\n", impute_out.c_str());
    } else if (feat->parsed()) {
      auto cfg = make_config(feat_c);
      auto ds = load_dataset(feat_data, feat_flows);
      etaknn_matrix* raw = nullptr;
      check(etaknn_build_features(ds.get(), cfg.get(),
                                  feat_role == "test" ? ETAKNN_ROLE_TEST : ETAKNN_ROLE_TRAIN,
                                  &raw));
      MatrixPtr m(raw);
      check(etaknn_matrix_save(m.get(), feat_out.c_str()));
      std::size_t rows = 0, cols = 0;
      check(etaknn_matrix_shape(m.get(), &rows, &cols));
      std::printf("wrote %zu rows x %zu features to %s\n", rows, cols, feat_out.c_str());
    } else if (trn->parsed()) {
      auto cfg = make_config(train_c);
      etaknn_matrix* raw = nullptr;
      check(etaknn_matrix_load(train_in.c_str(), &raw));
      MatrixPtr m(raw);
      etaknn_model* mraw = nullptr;
      check(etaknn_train(m.get(), cfg.get(), &mraw));
      ModelPtr model(mraw);
      check(etaknn_model_save(model.get(), train_out.c_str()));
      if (!train_log.empty()) {
        check(etaknn_model_save_training_log(model.get(), train_log.c_str()));
      }
      std::size_t n_trees = 0, n_imp = 0;
      check(etaknn_model_n_trees(model.get(), &n_trees));
      check(etaknn_model_importance_count(model.get(), &n_imp));
      std::printf("trained %zu trees; top features by gain share:\n", n_trees);
      for (std::size_t i = 0; i < n_imp && i < 5; ++i) {
        const char* name = nullptr;
        double share = 0.0;
        check(etaknn_model_importance(model.get(), i, &name, &share));
        std::printf("  %-32s %.4f\n", name, share);
      }
    } else if (pred->parsed()) {
      etaknn_model* mraw = nullptr;
      check(etaknn_model_load(pred_model.c_str(), &mraw));
      ModelPtr model(mraw);
      etaknn_matrix* raw = nullptr;
      check(etaknn_matrix_load(pred_in.c_str(), &raw));
      MatrixPtr m(raw);
      check(etaknn_predict_to_file(model.get(), m.get(), pred_out.c_str()));
      std::printf("wrote predictions to %s\n", pred_out.c_str());
    } else if (eval->parsed()) {
      double mae = 0.0;
      check(etaknn_evaluate_files(eval_pred.c_str(), eval_truth.c_str(), &mae));
      std::printf("MAE: %.6f\n", mae);
    } else if (abl->parsed()) {
      auto cfg = make_config(abl_c);
      auto ds = load_dataset(abl_data, abl_flows);
      check(etaknn_ablate(ds.get(), cfg.get(), abl_spec.empty() ? nullptr : abl_spec.c_str(),
                          abl_out.c_str()));
      std::printf("wrote comparison table to %s\n", abl_out.c_str());
    }
  } catch (const Failure& f) {
    std::fprintf(stderr, "etaknn: %s error: %s\n", etaknn_status_name(f.status),
                 etaknn_last_error());
    return 1;
  }
  return 0;
}
