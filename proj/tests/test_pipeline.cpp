#include <cmath>
#include <optional>
#include <sstream>

#include "doctest.h"
#include "etaknn/error.hpp"
#include "etaknn/pipeline.hpp"
#include "etaknn/stats.hpp"
#include "etaknn/synthcity.hpp"
#include "fixtures.hpp"

using namespace etaknn;

namespace {

template <typename F>
std::optional<ErrorCode> code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

Dataset tiny_city(int days, std::uint64_t seed = 5) {
  SynthSpec spec;
  spec.n_nodes = 40;
  spec.n_edges = 90;
  spec.n_supersegments = 4;
  spec.counter_fraction = 0.2;
  spec.n_days = days;
  spec.missing_rate = 0.2;
  spec.seed = seed;
  return generate(spec).dataset;
}

PipelineConfig quick_config() {
  PipelineConfig cfg = PipelineConfig::defaults();
  cfg.gbdt.n_trees = 40;
  cfg.gbdt.n_leaves = 16;
  return cfg;
}

// Drops the trailing seconds column.
std::string without_seconds(const std::string& csv) {
  std::istringstream in(csv);
  std::string out, line;
  while (std::getline(in, line)) out += line.substr(0, line.rfind(',')) + '\n';
  return out;
}

}  // namespace

TEST_CASE("mean absolute error") {
  const std::vector<double> y{3.0, 7.0, 11.0};
  CHECK(mae(y, y) == 0.0);
  CHECK(mae(std::vector<double>{1, 3}, std::vector<double>{2, 2}) == 1.0);
  CHECK(code_of([] { mae(std::vector<double>{}, std::vector<double>{}); }) == ErrorCode::metric);
  CHECK(code_of([] { mae(std::vector<double>{1}, std::vector<double>{1, 2}); }) == ErrorCode::metric);

  Rng rng(3);
  std::vector<double> p(500), t(500), sp(500), st(500);
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = rng.uniform(1, 900);
    t[i] = rng.uniform(1, 900);
    sp[i] = 2.5 * p[i];
    st[i] = 2.5 * t[i];
  }
  CHECK(mae(sp, st) == doctest::Approx(2.5 * mae(p, t)).epsilon(1e-12));
}

TEST_CASE("panel error ignores cells missing on either side") {
  Rng rng(4);
  EtaPanel truth, pred;
  truth.supersegment_ids = pred.supersegment_ids = {1, 2};
  truth.data = pred.data = Panel(50, 2);
  std::vector<double> kept_p, kept_t;
  for (std::size_t t = 0; t < 50; ++t) {
    for (std::size_t s = 0; s < 2; ++s) {
      const double a = rng.uniform(10, 500), b = rng.uniform(10, 500);
      truth.data.set(t, s, a);
      if ((t + s) % 2 == 0) {
        pred.data.set(t, s, b);
        kept_p.push_back(b);
        kept_t.push_back(a);
      }
    }
  }
  CHECK(mae(pred, truth) == doctest::Approx(mae(kept_p, kept_t)).epsilon(1e-12));

  EtaPanel empty = pred;
  empty.data = Panel(50, 2);
  CHECK(code_of([&] { mae(empty, truth); }) == ErrorCode::metric);

  const std::vector<LongCell> lp{{0, 1, 10.0}, {1, 1, 20.0}};
  const std::vector<LongCell> lt{{0, 1, 12.0}, {1, 1, 26.0}, {5, 1, 99.0}};
  CHECK(mae(lp, lt) == 4.0);
}

TEST_CASE("held-out day count") {
  CHECK(held_out_days(TimeIndex({2024, 1, 1}, 14), 0.2) == 3);
  CHECK(held_out_days(TimeIndex({2024, 1, 1}, 35), 0.2) == 7);
  CHECK(held_out_days(TimeIndex({2024, 1, 1}, 3), 0.01) == 1);
  CHECK(held_out_days(TimeIndex({2024, 1, 1}, 2), 0.9) == 1);
  CHECK(code_of([] { held_out_days(TimeIndex({2024, 1, 1}, 1), 0.2); }) == ErrorCode::split);
}

TEST_CASE("slot-of-day baseline") {
  const TimeIndex time({2024, 1, 1}, 4, 4);
  EtaPanel etas;
  etas.supersegment_ids = {7};
  etas.data = Panel(time.total_steps(), 1);
  // Slot 1 over the three training days: 50, 70, (missing); slot 2 never seen.
  etas.data.set(time.step_of(0, 1), 0, 50.0);
  etas.data.set(time.step_of(1, 1), 0, 70.0);
  etas.data.set(time.step_of(0, 0), 0, 5.0);
  etas.data.set(time.step_of(1, 0), 0, 9.0);
  etas.data.set(time.step_of(2, 0), 0, 6.0);
  etas.data.set(time.step_of(3, 1), 0, 1000.0);  // held out, must not leak
  const EtaPanel b = slot_median_baseline(etas, time, 3);
  CHECK(b.data.value(time.step_of(3, 0), 0) == 6.0);
  CHECK(b.data.value(time.step_of(3, 1), 0) == 60.0);
  CHECK_FALSE(b.data.valid(time.step_of(3, 2), 0));
  CHECK_FALSE(b.data.valid(time.step_of(1, 1), 0));
}

TEST_CASE("end-to-end run on a small city") {
  const Dataset ds = tiny_city(14);
  const PipelineConfig cfg = quick_config();
  const PipelineResult r = run_pipeline(cfg, ds);
  CHECK(r.test_days == 3);
  CHECK(r.train_days == 11);
  CHECK(r.test_rows == 3u * 96u * ds.graph.supersegments().size());
  CHECK(std::isfinite(r.mae));
  CHECK(r.mae > 0.0);
  CHECK(std::isfinite(r.baseline_mae));
  double share = 0.0;
  for (double g : r.group_share) share += g;
  CHECK(std::abs(share - 1.0) <= 1e-9);
  const std::size_t first_test = 11u * 96u;
  for (std::size_t t = 0; t < r.predictions.data.rows(); ++t) {
    for (std::size_t s = 0; s < r.predictions.data.cols(); ++s) {
      if (!r.predictions.data.valid(t, s)) continue;
      CHECK(t >= first_test);
      const double v = r.predictions.data.value(t, s);
      CHECK((v >= 1.0 && v <= 3600.0));
    }
  }

  // Reusing the imputed panel reproduces the run exactly.
  const FlowPanel imputed = impute_training_flows(cfg, ds);
  const PipelineResult again = run_pipeline_on(cfg, ds, imputed);
  CHECK(again.mae == r.mae);
}

TEST_CASE("ablation spec parsing") {
  const auto spec = parse_ablation_spec(
      "splitting,flow_metric,y_metrics,n_trees,n_leaves\n"
      "# comment\n"
      "equal,euclidean,euclidean,1500,42\r\n"
      "day-wise,manhattan,euclidean+manhattan+normalized_euclidean,2000,64\n");
  REQUIRE(spec.rows.size() == 2);
  CHECK(spec.rows[0].split == SplitStrategy::equal);
  CHECK(spec.rows[1].y_metrics.size() == 3);
  CHECK(spec.rows[1].n_leaves == 64);
  CHECK(code_of([] { parse_ablation_spec("holdout,manhattan,euclidean,10,4\n"); }) == ErrorCode::config);
  CHECK(code_of([] { parse_ablation_spec("day-wise,manhattan,euclidean,10\n"); }) == ErrorCode::config);
  CHECK(code_of([] { parse_ablation_spec("day-wise,cosine,euclidean,10,4\n"); }) == ErrorCode::config);
  CHECK(code_of([] { parse_ablation_spec("# nothing\n"); }) == ErrorCode::config);
  CHECK(AblationSpec::reference_table().rows.size() == 8);
}

TEST_CASE("ablation table is reproducible") {
  const Dataset ds = tiny_city(18);
  const auto spec = parse_ablation_spec(
      "equal,manhattan,euclidean,30,8\n"
      "day-wise,manhattan,euclidean,30,8\n");
  const PipelineConfig base = quick_config();
  const auto first = run_ablation(spec, base, ds);
  REQUIRE(first.size() == 2);
  // The two rows differ only in how neighbors are split, so the error must too.
  CHECK(first[0].mae != first[1].mae);

  const std::string csv = ablation_csv(first);
  CHECK(csv.rfind("splitting,flow_metric,y_metrics,n_trees,n_leaves,mae,seconds\n", 0) == 0);
  CHECK(csv.find("\nequal,manhattan,euclidean,30,8,") != std::string::npos);
  CHECK(csv.find("\nday-wise,manhattan,euclidean,30,8,") != std::string::npos);

  const auto second = run_ablation(spec, base, ds);
  CHECK(without_seconds(ablation_csv(second)) == without_seconds(csv));

  // Too few training days for two weeks of equal split fails before any row runs.
  CHECK(code_of([&] { run_ablation(spec, base, tiny_city(14)); }) == ErrorCode::split);
}
