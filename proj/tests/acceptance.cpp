// Acceptance run: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <string>

#include "etaknn/features.hpp"
#include "etaknn/gbdt.hpp"
#include "etaknn/impute.hpp"
#include "etaknn/log.hpp"
#include "etaknn/neighbors.hpp"
#include "etaknn/pipeline.hpp"
#include "etaknn/stats.hpp"
#include "etaknn/synthcity.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace etaknn;

namespace {

// Pinned tolerances and budgets.
constexpr double kPosteriorRelTol = 1e-8;
constexpr double kPosteriorBudgetS = 60;
constexpr double kGapRmseRatio = 0.2;
constexpr double kImputeBudgetS = 300;
constexpr double kKnnBudgetS = 30;
constexpr double kMonotoneTol = 1e-9;
constexpr double kLiftRequired = 0.10;
constexpr double kPipelineBudgetS = 600;
constexpr double kImportanceTol = 1e-9;
constexpr double kRoundTripTol = 1e-9;

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
  std::string warning;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---------------------------------------------------------------- 1 -----

Outcome gp_oracle() {
  const auto t0 = Clock::now();
  Rng rng(101);
  GpConfig cfg;
  double worst = 0.0;
  for (int w = 0; w < 100; ++w) {
    // Noisy daily cycle plus trend, random size and gap pattern.
    const double amp = rng.uniform(20, 200), base = rng.uniform(50, 300);
    const double keep = rng.uniform(0.1, 0.9);
    std::vector<double> x, y, xs;
    for (int t = 0; t < 480; ++t) {
      const double v = base + amp * std::sin(2 * std::numbers::pi * t / 96.0) +
                       0.1 * base * t / 480.0 + rng.normal() * 0.05 * amp;
      if (rng.bernoulli(keep)) {
        x.push_back(t);
        y.push_back(v);
      } else {
        xs.push_back(t);
      }
    }
    if (x.size() < cfg.min_observations || xs.empty()) {
      --w;
      continue;
    }
    const FittedGp m = gp_fit_window(x, y, cfg);
    const GpPosterior post = gp_posterior(m, xs);
    const auto ref = oracle::gp_posterior(m.params, m.noise_used, x, y, xs, cfg.normalize_y);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      worst = std::max(worst, std::abs(post.mean[i] - ref.mean[i]) / std::abs(ref.mean[i]));
      worst = std::max(worst, std::abs(post.variance[i] - ref.variance[i]) /
                                  std::max(ref.variance[i], 1e-300));
    }
  }
  const double secs = since(t0);
  return {worst <= kPosteriorRelTol && secs < kPosteriorBudgetS,
          fmt("100 windows, worst relative error %.2e (tol %.0e), %.1f s (budget %.0f s)", worst,
              kPosteriorRelTol, secs, kPosteriorBudgetS)};
}

// ---------------------------------------------------------------- 2 -----

Outcome imputation_quality() {
  SynthSpec spec;
  spec.n_nodes = 400;
  spec.n_edges = 1000;
  spec.n_supersegments = 10;
  spec.counter_fraction = 0.5;
  spec.n_days = 14;
  spec.missing_rate = 0.2;
  spec.congestion_regimes = 1;
  spec.day_jitter = 0.0;
  spec.seed = 202;
  const auto city = generate(spec);
  const auto& flows = city.dataset.flows;
  const auto truth = oracle_flows(city.latent, flows.counter_ids);

  const auto t0 = Clock::now();
  const FlowPanel out = impute_panel(flows, GpConfig{});
  const double secs = since(t0);

  std::size_t failing = 0, changed = 0;
  double worst = 0.0, sum = 0.0;
  for (std::size_t c = 0; c < flows.data.cols(); ++c) {
    std::vector<double> series;
    double se = 0.0;
    std::size_t gaps = 0;
    for (std::size_t t = 0; t < flows.data.rows(); ++t) {
      series.push_back(truth.data.value(t, c));
      if (flows.data.valid(t, c)) {
        changed += out.data.value(t, c) != flows.data.value(t, c) ||
                   out.data.state(t, c) != flows.data.state(t, c);
      } else {
        se += std::pow(out.data.value(t, c) - truth.data.value(t, c), 2);
        ++gaps;
        changed += !out.data.valid(t, c);  // every gap must be filled
      }
    }
    const double ratio = std::sqrt(se / static_cast<double>(gaps)) / stddev(series);
    worst = std::max(worst, ratio);
    sum += ratio;
    failing += !(ratio < kGapRmseRatio);
  }
  const std::size_t n = flows.data.cols();
  return {n >= 200 && failing == 0 && changed == 0 && secs < kImputeBudgetS,
          fmt("%zu counters x 14 days: gap RMSE/std mean %.3f worst %.3f (limit %.2f), %zu over, "
              "%zu observed cells altered, %.1f s (budget %.0f s)",
              n, sum / static_cast<double>(n), worst, kGapRmseRatio, failing, changed, secs,
              kImputeBudgetS)};
}

// ---------------------------------------------------------------- 3 -----

Outcome knn_oracle() {
  const auto t0 = Clock::now();
  Rng rng(303);
  std::map<Metric, int> mismatches;
  for (Metric metric : {Metric::manhattan, Metric::euclidean, Metric::normalized_euclidean}) {
    SupportSet s(12);
    for (std::size_t i = 0; i < 400; ++i) {
      MaskedVector v;
      for (int j = 0; j < 12; ++j) {
        // Small integers force frequent distance ties.
        v.values.push_back(std::floor(rng.uniform(0, 4)));
        v.valid.push_back(rng.bernoulli(0.3) ? 0 : 1);
      }
      s.add(10 * i + 4, v);
    }
    const auto norm = normalize_support(s);
    for (int q = 0; q < 200; ++q) {
      MaskedVector v;
      for (int j = 0; j < 12; ++j) {
        v.values.push_back(std::floor(rng.uniform(0, 4)));
        v.valid.push_back(rng.bernoulli(0.3) ? 0 : 1);
      }
      const std::size_t k = 1 + rng.below(60);
      const auto got = knn_query(v, 0, s, FilterSpec{k, metric, "f"}, &norm);
      mismatches[metric] += got.neighbor_steps != oracle::knn(v, s, metric, k, &norm);
    }
  }
  const double secs = since(t0);
  const int total = mismatches[Metric::manhattan] + mismatches[Metric::euclidean] +
                    mismatches[Metric::normalized_euclidean];
  return {total == 0 && secs < kKnnBudgetS,
          fmt("3 metrics x 200 queries: %d/%d/%d mismatched lists, %.2f s (budget %.0f s)",
              mismatches[Metric::manhattan], mismatches[Metric::euclidean],
              mismatches[Metric::normalized_euclidean], secs, kKnnBudgetS)};
}

// ---------------------------------------------------------------- 4 -----

Dataset audit_city(int days) {
  SynthSpec spec;
  spec.n_days = days;
  spec.n_supersegments = 8;
  spec.missing_rate = 0.3;
  spec.seed = 404;
  return generate(spec).dataset;
}

Outcome leakage() {
  const PipelineConfig cfg = PipelineConfig::defaults();
  const Dataset ds = audit_city(14);
  std::vector<SplitPlan> folds;
  for (int d = 0; d < ds.time.n_days(); ++d) folds.push_back(split_daywise(ds.time, d));
  const auto dw = fixtures::leakage_audit(cfg, ds, folds, 1);
  const auto eq = fixtures::leakage_audit(cfg, ds, {split_equal(ds.time)}, 2);
  return {dw.changed == 0 && eq.changed == 0 && dw.cells > 0 && eq.cells > 0,
          fmt("day-wise %zu folds: %zu of %zu feature cells changed; equal: %zu of %zu changed",
              dw.folds, dw.changed, dw.cells, eq.changed, eq.cells)};
}

// ---------------------------------------------------------------- 5 -----

Outcome missing_robustness() {
  std::string detail = "recall@10 masked-manhattan vs zero-fill-euclidean at 50% missing:";
  bool pass = true;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto r = fixtures::masked_vs_zero_fill(seed, 0.5, 60);
    detail += fmt(" s%llu %.3f/%.3f", static_cast<unsigned long long>(seed), r.candidate,
                  r.reference);
    pass = pass && r.candidate >= r.reference;
  }
  return {pass, detail};
}

// ---------------------------------------------------------------- 6 -----

GbdtConfig gbdt_cfg(std::size_t trees) {
  GbdtConfig c;
  c.n_trees = trees;
  c.n_leaves = 8;
  c.max_depth = 4;
  c.min_samples_leaf = 5;
  c.n_bins = 32;
  c.seed = 17;
  return c;
}

double sorted_median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

Outcome gbdt_correctness() {
  Rng rng(606);
  // (a) leaf values against a sort-based median of each leaf's residuals.
  std::size_t sets = 0, leaves = 0, bad_leaves = 0;
  for (int set = 0; set < 1000; ++set) {
    auto m = fixtures::random_matrix(rng, 30 + rng.below(120), 3, 0.1);
    auto cfg = gbdt_cfg(1);
    cfg.learning_rate = rng.uniform(0.05, 1.0);
    const auto model = train(m, cfg);
    if (model.trees.empty()) continue;
    ++sets;
    const Tree& t = model.trees[0];
    std::vector<std::vector<double>> res(t.nodes.size());
    for (std::size_t r = 0; r < m.n_rows(); ++r) {
      const auto leaf = fixtures::leaf_of(t, &m.values[r * m.n_cols()], &m.valid[r * m.n_cols()]);
      res[static_cast<std::size_t>(leaf)].push_back(m.labels[r] - model.base_score);
    }
    for (std::size_t i = 0; i < t.nodes.size(); ++i) {
      if (!t.nodes[i].is_leaf()) continue;
      ++leaves;
      bad_leaves += t.nodes[i].value != cfg.learning_rate * sorted_median(res[i]);
    }
  }
  const bool a = sets == 1000 && bad_leaves == 0;

  // (b) per-round training error.
  const auto big = fixtures::random_matrix(rng, 3000, 8, 0.2, true);
  const auto curve = train(big, gbdt_cfg(300)).train_mae;
  std::size_t rises = 0;
  for (std::size_t r = 1; r < curve.size(); ++r) rises += curve[r] > curve[r - 1] + kMonotoneTol;
  const bool b = rises == 0 && curve.size() > 1;

  // (c) constant labels.
  auto flat = fixtures::random_matrix(rng, 500, 4, 0.1);
  for (double& y : flat.labels) y = 321.5;
  std::size_t off = 0;
  for (double p : predict(train(flat, gbdt_cfg(30)), flat)) off += p != 321.5;
  const bool c = off == 0;

  // (d) identical model files across runs and worker counts.
  const auto dir = fixtures::scratch_dir("accept_gbdt");
  std::set<std::string> files;
  for (int threads : {1, 1, 2, 4, 4}) {
    auto cfg = gbdt_cfg(80);
    cfg.threads = threads;
    save_model(train(big, cfg), (dir / "m.json").string());
    files.insert(fixtures::read_file(dir / "m.json"));
  }
  const bool d = files.size() == 1;

  return {a && b && c && d,
          fmt("(a) %zu sets, %zu leaves, %zu off-median; (b) %zu rises over %zu rounds; "
              "(c) %zu inexact; (d) %zu distinct files over 5 runs with 1/2/4 workers",
              sets, leaves, bad_leaves, rises, curve.size(), off, files.size())};
}

// ------------------------------------------------------------ 7 and 9 ---

struct EndToEnd {
  PipelineResult result;
  double seconds = 0.0;
};

const EndToEnd& end_to_end() {
  static std::optional<EndToEnd> cached;
  if (!cached) {
    SynthSpec spec;
    spec.n_days = 14;
    spec.missing_rate = 0.2;
    spec.seed = 1;
    const Dataset ds = generate(spec).dataset;
    PipelineConfig cfg = PipelineConfig::defaults();
    cfg.seed = 1;
    const auto t0 = Clock::now();
    EndToEnd e;
    e.result = run_pipeline(cfg, ds);
    e.seconds = since(t0);
    cached = std::move(e);
  }
  return *cached;
}

Outcome lift() {
  const auto& e = end_to_end();
  const double gain = 1.0 - e.result.mae / e.result.baseline_mae;
  return {gain >= kLiftRequired && e.seconds < kPipelineBudgetS,
          fmt("14-day city: MAE %.3f vs slot-median %.3f, lift %.1f%% (need %.0f%%), "
              "%d held-out days, %.1f s (budget %.0f s)",
              e.result.mae, e.result.baseline_mae, 100 * gain, 100 * kLiftRequired,
              e.result.test_days, e.seconds, kPipelineBudgetS)};
}

Outcome importance() {
  const auto& e = end_to_end();
  double total = 0.0;
  for (const auto& [name, share] : feature_importance(e.result.model)) total += share;
  const auto& g = e.result.group_share;
  const double sim = g[static_cast<std::size_t>(FeatureGroup::similarity)];
  const double flow = g[static_cast<std::size_t>(FeatureGroup::nodeflow)];
  Outcome o{std::abs(total - 1.0) <= kImportanceTol,
            fmt("shares sum to 1%+.1e (tol %.0e); similarity %.3f, nodeflow %.3f", total - 1.0,
                kImportanceTol, sim, flow)};
  if (!(sim > flow)) o.warning = "similarity group does not outweigh nodeflow";
  return o;
}

// ---------------------------------------------------------------- 8 -----

Outcome ablation_direction() {
  SynthSpec spec;
  spec.n_days = 35;
  spec.missing_rate = 0.5;
  spec.seed = 1;
  const Dataset ds = generate(spec).dataset;
  // Rows 1-2 of the reference table differ only in the split; row 3 also
  // switches the flow metric to manhattan.
  AblationSpec rows;
  const auto ref = AblationSpec::reference_table();
  rows.rows = {ref.rows[0], ref.rows[1], ref.rows[2]};
  PipelineConfig base = PipelineConfig::defaults();
  base.seed = 1;
  const auto t0 = Clock::now();
  const auto r = run_ablation(rows, base, ds);
  return {r[1].mae <= r[0].mae && r[2].mae <= r[0].mae,
          fmt("35-day city, 50%% missing flows: equal+euclidean %.3f, day-wise+euclidean %.3f, "
              "day-wise+manhattan %.3f, %.1f s",
              r[0].mae, r[1].mae, r[2].mae, since(t0))};
}

// ---------------------------------------------------------------- 10 ----

Outcome round_trips() {
  SynthSpec spec;
  spec.n_days = 7;
  spec.n_supersegments = 6;
  spec.missing_rate = 0.3;
  spec.eta_missing_rate = 0.1;
  spec.seed = 1010;
  const Dataset ds = generate(spec).dataset;
  const auto dir = fixtures::scratch_dir("accept_rt");
  std::size_t bad = 0;
  double worst = 0.0;
  auto compare = [&](const Panel& a, const Panel& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
      ++bad;
      return;
    }
    for (std::size_t t = 0; t < a.rows(); ++t) {
      for (std::size_t c = 0; c < a.cols(); ++c) {
        if (a.valid(t, c) != b.valid(t, c)) ++bad;
        else if (a.valid(t, c)) worst = std::max(worst, std::abs(a.value(t, c) - b.value(t, c)));
      }
    }
  };

  save_dataset(ds, dir / "city");
  const Dataset back = load_dataset(dir / "city");
  bad += back.graph.supersegments().size() != ds.graph.supersegments().size();
  bad += back.flows.counter_ids != ds.flows.counter_ids;
  bad += back.etas.supersegment_ids != ds.etas.supersegment_ids;
  compare(ds.flows.data, back.flows.data);
  compare(ds.etas.data, back.etas.data);

  PipelineConfig cfg = PipelineConfig::defaults();
  cfg.gbdt.n_trees = 100;
  const FeatureMatrix m = build_fold_rows(cfg, ds.graph, ds.flows, ds.etas, split_daywise(ds.time, 2));
  save_matrix(m, dir / "m.csv");
  const FeatureMatrix mb = load_matrix(dir / "m.csv");
  bad += mb.n_rows() != m.n_rows() || mb.n_cols() != m.n_cols() || mb.keys.size() != m.keys.size();
  if (!bad) {
    bad += mb.valid != m.valid;
    for (std::size_t i = 0; i < m.values.size(); ++i)
      if (m.valid[i]) worst = std::max(worst, std::abs(m.values[i] - mb.values[i]));
    bad += mb.label_valid != m.label_valid;
    for (std::size_t r = 0; r < m.n_rows(); ++r)
      if (m.label_valid[r]) worst = std::max(worst, std::abs(m.labels[r] - mb.labels[r]));
  }

  const GbdtModel model = train(m, stage_gbdt_config(cfg));
  save_model(model, (dir / "model.json").string());
  const GbdtModel mload = load_model((dir / "model.json").string());
  bad += mload.trees.size() != model.trees.size();
  for (std::size_t i = 0; i < std::min(model.trees.size(), mload.trees.size()); ++i)
    bad += mload.trees[i].nodes.size() != model.trees[i].nodes.size();
  bad += feature_importance(mload) != feature_importance(model);
  const auto p1 = predict(model, mb), p2 = predict(mload, mb);
  for (std::size_t i = 0; i < p1.size(); ++i) worst = std::max(worst, std::abs(p1[i] - p2[i]));

  return {bad == 0 && worst <= kRoundTripTol,
          fmt("dataset panels, %zu-row matrix and %zu-tree model: %zu structural differences, "
              "worst value difference %.1e (tol %.0e)",
              m.n_rows(), model.trees.size(), bad, worst, kRoundTripTol)};
}

}  // namespace

int main(int argc, char** argv) {
  set_log_sink([](LogLevel level, std::string_view msg) {
    if (level == LogLevel::warning) std::fprintf(stderr, "  warning: %.*s\n", int(msg.size()), msg.data());
  });
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"GP posterior matches dense direct solve", gp_oracle},
      {"imputation gap RMSE on daily-periodic counters", imputation_quality},
      {"KNN equals exhaustive scan", knn_oracle},
      {"no query-day leakage", leakage},
      {"masked distance robust to missing flows", missing_robustness},
      {"GBDT correctness", gbdt_correctness},
      {"end-to-end lift over slot-of-day median", lift},
      {"day-wise split no worse than equal split", ablation_direction},
      {"importance accounting", importance},
      {"save/load round-trips", round_trips},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %2d  %s: %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first,
                o.detail.c_str());
    if (!o.warning.empty()) std::printf("WARN %2d  %s\n", id, o.warning.c_str());
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
