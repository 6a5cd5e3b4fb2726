#include "fixtures.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "etaknn/features.hpp"
#include "etaknn/neighbors.hpp"
#include "etaknn/stats.hpp"
#include "etaknn/synthcity.hpp"

namespace fixtures {

etaknn::RoadGraph chain_graph() {
  using namespace etaknn;
  std::vector<Node> nodes{{1, 51.50, -0.10, true}, {2, 51.50, -0.09, false},
                          {3, 51.51, -0.09, true}};
  std::vector<Edge> edges{{10, 1, 2, 500.0, 50.0, HighwayClass::secondary},
                          {11, 2, 3, 500.0, 50.0, HighwayClass::secondary}};
  std::vector<Supersegment> ss{{100, {10, 11}}};
  return RoadGraph(std::move(nodes), std::move(edges), std::move(ss));
}

std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("etaknn_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

etaknn::FlowPanel empty_flows(std::size_t steps, std::vector<etaknn::NodeId> ids) {
  etaknn::FlowPanel f;
  f.data = etaknn::Panel(steps, ids.size());
  f.counter_ids = std::move(ids);
  return f;
}

namespace {

constexpr std::size_t kRecallK = 10;

double recall(const std::vector<std::size_t>& got, const std::vector<std::size_t>& truth) {
  std::unordered_set<std::size_t> t(truth.begin(), truth.end());
  std::size_t hit = 0;
  for (std::size_t s : got) hit += t.count(s);
  return static_cast<double>(hit) / static_cast<double>(truth.size());
}

struct RecallSetup {
  etaknn::SynthCity city;
  etaknn::SplitPlan plan;
  etaknn::SupportSet support;        // observed flows
  etaknn::SupportSet truth_support;  // noise-free flows
  std::vector<std::size_t> queries;
};

RecallSetup recall_setup(std::uint64_t seed, double missing_rate, std::size_t n_queries) {
  using namespace etaknn;
  SynthSpec spec;
  spec.seed = seed;
  spec.missing_rate = missing_rate;
  RecallSetup s{generate(spec), {}, {}, {}, {}};
  const auto& time = s.city.dataset.time;
  s.plan = split_daywise(time, time.n_days() - 1);
  s.support = build_support(s.city.dataset.flows, s.plan);
  s.truth_support =
      build_support(oracle_flows(s.city.latent, s.city.dataset.flows.counter_ids), s.plan);
  auto query_steps = s.plan.steps_with(StepRole::query);
  Rng rng(sub_seed(seed, "test/recall"));
  rng.shuffle(query_steps);
  query_steps.resize(std::min(n_queries, query_steps.size()));
  s.queries = query_steps;
  return s;
}

std::vector<std::size_t> truth_neighbors(const RecallSetup& s, std::size_t step) {
  using namespace etaknn;
  const FlowPanel clean = oracle_flows(s.city.latent, s.city.dataset.flows.counter_ids);
  const auto q = flatten_window(clean, QueryWindow::at(step, clean.data.rows()));
  return rank_support(q, s.truth_support, Metric::euclidean).steps;
}

std::vector<std::size_t> top(std::vector<std::size_t> v) {
  v.resize(std::min(v.size(), kRecallK));
  return v;
}

}  // namespace

RecallComparison masked_vs_zero_fill(std::uint64_t seed, double missing_rate,
                                     std::size_t n_queries) {
  using namespace etaknn;
  RecallSetup s = recall_setup(seed, missing_rate, n_queries);
  const auto& flows = s.city.dataset.flows;
  SupportSet filled(s.support.dims());
  for (std::size_t i = 0; i < s.support.size(); ++i) {
    MaskedVector row;
    row.values.assign(s.support.values(i), s.support.values(i) + s.support.dims());
    row.valid.assign(s.support.valid(i), s.support.valid(i) + s.support.dims());
    filled.add(s.support.step(i), zero_fill(row));
  }
  RecallComparison out;
  for (std::size_t step : s.queries) {
    const auto truth = top(truth_neighbors(s, step));
    const auto q = flatten_window(flows, QueryWindow::at(step, flows.data.rows()));
    out.candidate += recall(top(rank_support(q, s.support, Metric::manhattan).steps), truth);
    out.reference +=
        recall(top(rank_support(zero_fill(q), filled, Metric::euclidean).steps), truth);
  }
  out.candidate /= static_cast<double>(s.queries.size());
  out.reference /= static_cast<double>(s.queries.size());
  return out;
}

RecallComparison sparse_vs_standard(std::uint64_t seed, double support_missing,
                                    double query_missing, std::size_t n_queries) {
  using namespace etaknn;
  RecallSetup s = recall_setup(seed, support_missing, n_queries);
  const auto& flows = s.city.dataset.flows;
  Rng rng(sub_seed(seed, "test/thin"));
  RecallComparison out;
  for (std::size_t step : s.queries) {
    const auto truth = top(truth_neighbors(s, step));
    auto q = flatten_window(flows, QueryWindow::at(step, flows.data.rows()));
    std::vector<std::size_t> valid_dims;
    for (std::size_t j = 0; j < q.size(); ++j)
      if (q.valid[j]) valid_dims.push_back(j);
    rng.shuffle(valid_dims);
    const auto keep = static_cast<std::size_t>(
        std::max(1.0, std::floor((1.0 - query_missing) * static_cast<double>(q.size()))));
    for (std::size_t i = keep; i < valid_dims.size(); ++i) q.valid[valid_dims[i]] = 0;
    out.candidate += recall(top(rank_support_sparse(q, s.support, Metric::manhattan).steps), truth);
    out.reference += recall(top(rank_support(q, s.support, Metric::manhattan).steps), truth);
  }
  out.candidate /= static_cast<double>(s.queries.size());
  out.reference /= static_cast<double>(s.queries.size());
  return out;
}

LeakageAudit leakage_audit(const etaknn::PipelineConfig& cfg, const etaknn::Dataset& ds,
                           const std::vector<etaknn::SplitPlan>& plans, std::uint64_t seed) {
  using namespace etaknn;
  LeakageAudit audit;
  Rng rng(sub_seed(seed, "test/leakage"));
  for (const SplitPlan& plan : plans) {
    const FeatureMatrix base = build_fold_rows(cfg, ds.graph, ds.flows, ds.etas, plan);
    EtaPanel scrambled = ds.etas;
    for (std::size_t t : plan.steps_with(StepRole::query)) {
      for (std::size_t s = 0; s < scrambled.data.cols(); ++s) {
        if (rng.bernoulli(0.1)) {
          scrambled.data.clear(t, s);
        } else {
          scrambled.data.set(t, s, rng.uniform(1.0, kMaxEtaSeconds));
        }
      }
    }
    const FeatureMatrix again = build_fold_rows(cfg, ds.graph, ds.flows, scrambled, plan);
    ++audit.folds;
    audit.cells += base.values.size();
    if (again.values.size() != base.values.size()) {
      audit.changed += base.values.size();
      continue;
    }
    for (std::size_t i = 0; i < base.values.size(); ++i) {
      audit.changed += base.valid[i] != again.valid[i] || base.values[i] != again.values[i];
    }
  }
  return audit;
}

etaknn::FeatureMatrix random_matrix(etaknn::Rng& rng, std::size_t rows, std::size_t cols,
                                    double missing, bool with_categorical) {
  using namespace etaknn;
  FeatureMatrix m;
  for (std::size_t c = 0; c < cols; ++c) {
    const bool cat = with_categorical && c == 0;
    m.columns.push_back({"f" + std::to_string(c), cat ? FeatureGroup::static_ : FeatureGroup::similarity,
                         cat ? FeatureType::categorical : FeatureType::numeric});
  }
  for (std::size_t r = 0; r < rows; ++r) {
    std::vector<double> v(cols);
    std::vector<std::uint8_t> ok(cols, 1);
    for (std::size_t c = 0; c < cols; ++c) {
      v[c] = (with_categorical && c == 0) ? static_cast<double>(rng.below(6)) : rng.uniform(0, 10);
      if (rng.bernoulli(missing)) ok[c] = 0, v[c] = 0.0;
    }
    double y = 100 + 20 * v[cols > 1 ? 1 : 0] + 10 * rng.normal();
    if (with_categorical) y += 40.0 * (static_cast<int>(v[0]) % 3);
    m.append_row({r, 1}, v, ok, std::max(1.0, y));
  }
  return m;
}

int leaf_of(const etaknn::Tree& t, const double* row, const std::uint8_t* ok) {
  using etaknn::TreeNode;
  int idx = 0;
  for (;;) {
    const TreeNode& n = t.nodes[static_cast<std::size_t>(idx)];
    if (n.is_leaf()) return idx;
    const auto f = static_cast<std::size_t>(n.feature);
    bool left;
    if (!ok[f]) {
      left = n.default_left;
    } else if (!n.left_categories.empty()) {
      left = std::find(n.left_categories.begin(), n.left_categories.end(), row[f]) !=
             n.left_categories.end();
    } else {
      left = row[f] <= n.threshold;
    }
    idx = left ? n.left : n.right;
  }
}

}  // namespace fixtures
