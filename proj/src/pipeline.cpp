#include "etaknn/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <map>
#include <sstream>

#include "etaknn/error.hpp"
#include "etaknn/log.hpp"
#include "etaknn/stats.hpp"

namespace etaknn {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

}  // namespace

double mae(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size()) {
    fail(ErrorCode::metric, "prediction and truth lengths differ");
  }
  if (pred.empty()) fail(ErrorCode::metric, "MAE of zero cells is undefined");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) sum += std::abs(pred[i] - truth[i]);
  return sum / static_cast<double>(pred.size());
}

double mae(const EtaPanel& pred, const EtaPanel& truth) {
  if (pred.data.rows() != truth.data.rows() || pred.data.cols() != truth.data.cols()) {
    fail(ErrorCode::metric, "prediction and truth panels differ in shape");
  }
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t t = 0; t < truth.data.rows(); ++t) {
    for (std::size_t s = 0; s < truth.data.cols(); ++s) {
      if (!truth.data.valid(t, s) || !pred.data.valid(t, s)) continue;
      sum += std::abs(pred.data.value(t, s) - truth.data.value(t, s));
      ++n;
    }
  }
  if (n == 0) fail(ErrorCode::metric, "no cell is valid in both panels");
  return sum / static_cast<double>(n);
}

double mae(const std::vector<LongCell>& pred, const std::vector<LongCell>& truth) {
  std::map<std::pair<std::size_t, std::int64_t>, double> by_key;
  for (const auto& c : pred) {
    if (!by_key.emplace(std::make_pair(c.step, c.id), c.value).second) {
      fail(ErrorCode::metric, "duplicate prediction for step " +
                                  std::to_string(c.step) + " id " + std::to_string(c.id));
    }
  }
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& c : truth) {
    const auto it = by_key.find({c.step, c.id});
    if (it == by_key.end()) continue;
    sum += std::abs(it->second - c.value);
    ++n;
  }
  if (n == 0) fail(ErrorCode::metric, "no truth cell has a matching prediction");
  return sum / static_cast<double>(n);
}

int held_out_days(const TimeIndex& time, double test_fraction) {
  if (time.n_days() < 2) fail(ErrorCode::split, "need at least two days to hold one out");
  const int n = static_cast<int>(std::lround(test_fraction * time.n_days()));
  return std::clamp(n, 1, time.n_days() - 1);
}

EtaPanel mask_from(const EtaPanel& etas, std::size_t first_step) {
  EtaPanel out = etas;
  for (std::size_t t = first_step; t < out.data.rows(); ++t) {
    for (std::size_t s = 0; s < out.data.cols(); ++s) out.data.clear(t, s);
  }
  return out;
}

EtaPanel slot_median_baseline(const EtaPanel& etas, const TimeIndex& time,
                              int n_train_days) {
  const auto spd = static_cast<std::size_t>(time.steps_per_day());
  const std::size_t first = static_cast<std::size_t>(n_train_days) * spd;
  EtaPanel out;
  out.supersegment_ids = etas.supersegment_ids;
  out.data = Panel(etas.data.rows(), etas.data.cols());
  std::vector<double> vals;
  for (std::size_t s = 0; s < etas.data.cols(); ++s) {
    for (std::size_t slot = 0; slot < spd; ++slot) {
      vals.clear();
      for (std::size_t t = slot; t < first; t += spd) {
        if (etas.data.valid(t, s)) vals.push_back(etas.data.value(t, s));
      }
      if (vals.empty()) continue;
      const double med = median_inplace(vals);
      for (std::size_t t = first + slot; t < etas.data.rows(); t += spd) {
        out.data.set(t, s, med, CellState::imputed);
      }
    }
  }
  return out;
}

EtaPanel predictions_panel(const FeatureMatrix& m, const std::vector<double>& preds,
                           const RoadGraph& graph, std::size_t total_steps) {
  EtaPanel out;
  for (const auto& s : graph.supersegments()) out.supersegment_ids.push_back(s.id);
  out.data = Panel(total_steps, out.supersegment_ids.size());
  for (std::size_t r = 0; r < m.n_rows(); ++r) {
    const auto col = graph.supersegment_index(m.keys[r].supersegment);
    if (col < 0 || m.keys[r].step >= total_steps) {
      fail(ErrorCode::schema, "prediction row does not belong to the dataset");
    }
    out.data.set(m.keys[r].step, static_cast<std::size_t>(col), preds[r],
                 CellState::imputed);
  }
  return out;
}

std::array<double, 4> group_importance(const GbdtModel& model) {
  std::array<double, 4> share{};
  std::map<std::string, FeatureGroup> group_of;
  for (const auto& f : model.features) group_of.emplace(f.name, f.group);
  for (const auto& [name, v] : feature_importance(model)) {
    share[static_cast<std::size_t>(group_of.at(name))] += v;
  }
  return share;
}

FlowPanel impute_training_flows(const PipelineConfig& cfg, const Dataset& ds,
                                ImputeReport* report) {
  const int test_days = held_out_days(ds.time, cfg.test_fraction);
  const std::size_t n_train_steps =
      static_cast<std::size_t>(ds.time.n_days() - test_days) *
      static_cast<std::size_t>(ds.time.steps_per_day());
  return impute_prefix(ds.flows, n_train_steps, cfg.gp, report);
}

GbdtConfig stage_gbdt_config(const PipelineConfig& cfg) {
  GbdtConfig g = cfg.gbdt;
  g.seed = sub_seed(cfg.seed, "gbdt");
  return g;
}

FeatureMatrix build_test_matrix(const PipelineConfig& cfg, const Dataset& ds,
                                const FlowPanel& flows, int train_days) {
  const std::size_t first_test =
      static_cast<std::size_t>(train_days) * static_cast<std::size_t>(ds.time.steps_per_day());
  // Held-out labels never reach the feature code; they are attached after.
  const EtaPanel visible = mask_from(ds.etas, first_test);
  FeatureMatrix m = build_fold_rows(cfg, ds.graph, flows, visible,
                                    split_holdout(ds.time, train_days));
  for (std::size_t r = 0; r < m.n_rows(); ++r) {
    const std::size_t t = m.keys[r].step;
    const auto s = static_cast<std::size_t>(ds.graph.supersegment_index(m.keys[r].supersegment));
    const bool ok = ds.etas.data.valid(t, s);
    m.labels[r] = ok ? ds.etas.data.value(t, s) : 0.0;
    m.label_valid[r] = ok ? 1 : 0;
  }
  return m;
}

PipelineResult run_pipeline(const PipelineConfig& cfg, const Dataset& ds) {
  const auto t0 = Clock::now();
  ImputeReport report;
  const FlowPanel imputed = impute_training_flows(cfg, ds, &report);
  for (const auto& w : report.warnings) log_warning(w);
  const double impute_s = seconds_since(t0);
  PipelineResult res = run_pipeline_on(cfg, ds, imputed);
  res.times.impute_s = impute_s;
  return res;
}

PipelineResult run_pipeline_on(const PipelineConfig& cfg, const Dataset& ds,
                               const FlowPanel& imputed) {
  cfg.validate();
  PipelineResult res;
  res.test_days = held_out_days(ds.time, cfg.test_fraction);
  res.train_days = ds.time.n_days() - res.test_days;
  const std::size_t first_test = static_cast<std::size_t>(res.train_days) *
                                 static_cast<std::size_t>(ds.time.steps_per_day());

  auto t0 = Clock::now();
  const EtaPanel train_etas = mask_from(ds.etas, first_test);
  const FeatureMatrix train_m = build_training_matrix(
      cfg, ds.graph, imputed, train_etas, ds.time, res.train_days);
  const FeatureMatrix test_m = build_test_matrix(cfg, ds, imputed, res.train_days);
  res.train_rows = train_m.n_rows();
  res.test_rows = test_m.n_rows();
  res.times.features_s = seconds_since(t0);

  t0 = Clock::now();
  res.model = train(train_m, stage_gbdt_config(cfg));
  res.times.train_s = seconds_since(t0);

  t0 = Clock::now();
  const std::vector<double> preds = predict(res.model, test_m);
  res.predictions = predictions_panel(test_m, preds, ds.graph, ds.time.total_steps());
  res.times.predict_s = seconds_since(t0);

  const EtaPanel truth = [&] {
    EtaPanel t = ds.etas;
    for (std::size_t s = 0; s < first_test; ++s) {
      for (std::size_t c = 0; c < t.data.cols(); ++c) t.data.clear(s, c);
    }
    return t;
  }();
  res.mae = mae(res.predictions, truth);
  res.baseline_mae = mae(slot_median_baseline(ds.etas, ds.time, res.train_days), truth);
  res.group_share = group_importance(res.model);
  return res;
}

// -------------------------------------------------------------- ablation --

AblationSpec AblationSpec::reference_table() {
  using M = Metric;
  const auto eq = SplitStrategy::equal, dw = SplitStrategy::daywise;
  AblationSpec spec;
  spec.rows = {
      {eq, M::euclidean, {M::euclidean}, 1500, 42},
      {dw, M::euclidean, {M::euclidean}, 1500, 42},
      {dw, M::manhattan, {M::euclidean}, 1500, 42},
      {dw, M::manhattan, {M::manhattan}, 1500, 42},
      {dw, M::manhattan, {M::euclidean, M::manhattan}, 1500, 42},
      {dw, M::manhattan, {M::euclidean, M::manhattan, M::normalized_euclidean}, 1500, 42},
      {dw, M::manhattan, {M::euclidean, M::manhattan}, 2000, 64},
      {dw, M::manhattan, {M::euclidean, M::normalized_euclidean}, 2000, 64},
  };
  return spec;
}

PipelineConfig ablation_config(const PipelineConfig& base, const AblationRow& row) {
  PipelineConfig cfg = base;
  cfg.split = row.split;
  cfg.knn_filters = filter_bank(row.flow_metric, row.y_metrics);
  cfg.gbdt.n_trees = row.n_trees;
  cfg.gbdt.n_leaves = row.n_leaves;
  return cfg;
}

std::vector<AblationResult> run_ablation(const AblationSpec& spec,
                                         const PipelineConfig& base,
                                         const Dataset& ds) {
  if (spec.rows.empty()) fail(ErrorCode::config, "ablation needs at least one row");
  std::vector<PipelineConfig> cfgs;
  for (const auto& row : spec.rows) {
    cfgs.push_back(ablation_config(base, row));
    cfgs.back().validate();
    if (row.split == SplitStrategy::equal) {
      // Fails early, before any row has been run.
      split_equal(ds.time, ds.time.n_days() - held_out_days(ds.time, base.test_fraction));
    }
  }
  ImputeReport report;
  const FlowPanel imputed = impute_training_flows(base, ds, &report);
  for (const auto& w : report.warnings) log_warning(w);

  std::vector<AblationResult> out;
  for (std::size_t i = 0; i < spec.rows.size(); ++i) {
    const auto t0 = Clock::now();
    const PipelineResult r = run_pipeline_on(cfgs[i], ds, imputed);
    out.push_back({spec.rows[i], r.mae, seconds_since(t0)});
    log_info("ablation row " + std::to_string(i + 1) + "/" +
             std::to_string(spec.rows.size()) + ": MAE " + format_double(r.mae));
  }
  return out;
}

namespace {

std::string join_metrics(const std::vector<Metric>& ms) {
  std::string s;
  for (Metric m : ms) {
    if (!s.empty()) s += '+';
    s += to_string(m);
  }
  return s;
}

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

}  // namespace

std::string ablation_csv(const std::vector<AblationResult>& results) {
  std::string out = "splitting,flow_metric,y_metrics,n_trees,n_leaves,mae,seconds\n";
  for (const auto& r : results) {
    out += std::string(r.row.split == SplitStrategy::equal ? "equal" : "day-wise") + ',';
    out += std::string(to_string(r.row.flow_metric)) + ',';
    out += join_metrics(r.row.y_metrics) + ',';
    out += std::to_string(r.row.n_trees) + ',' + std::to_string(r.row.n_leaves) + ',';
    out += fixed(r.mae, 4) + ',' + fixed(r.seconds, 2) + '\n';
  }
  return out;
}

AblationSpec parse_ablation_spec(const std::string& text) {
  AblationSpec spec;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#' || line.rfind("splitting,", 0) == 0) continue;
    std::vector<std::string> f;
    std::istringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
    auto bad = [&](const std::string& what) {
      fail(ErrorCode::config, "ablation spec line " + std::to_string(line_no) + ": " + what);
    };
    if (f.size() != 5) bad("expected split,flow_metric,y_metrics,n_trees,n_leaves");
    AblationRow row;
    try {
      row.split = parse_split(f[0]);
      row.flow_metric = parse_metric(f[1]);
      std::istringstream ys(f[2]);
      for (std::string m; std::getline(ys, m, '+');) row.y_metrics.push_back(parse_metric(m));
      row.n_trees = std::stoul(f[3]);
      row.n_leaves = std::stoul(f[4]);
    } catch (const Error& e) {
      bad(e.what());
    } catch (const std::exception&) {
      bad("malformed number");
    }
    if (row.split == SplitStrategy::holdout) bad("split must be equal or day-wise");
    spec.rows.push_back(std::move(row));
  }
  if (spec.rows.empty()) fail(ErrorCode::config, "ablation spec has no rows");
  return spec;
}

}  // namespace etaknn
