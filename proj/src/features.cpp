#include "etaknn/features.hpp"

#include <algorithm>
#include <set>

#include "etaknn/error.hpp"
#include "parallel.hpp"

namespace etaknn {

std::optional<SummaryStats> label_stats(const EtaPanel& etas,
                                        std::size_t supersegment,
                                        const std::vector<std::size_t>& steps) {
  std::vector<double> vals;
  vals.reserve(steps.size());
  for (std::size_t t : steps) {
    if (etas.data.valid(t, supersegment)) vals.push_back(etas.data.value(t, supersegment));
  }
  if (vals.empty()) return std::nullopt;
  return summarize(vals);
}

std::vector<std::optional<SummaryStats>> similarity_features(
    const std::vector<NeighborSet>& nsets, const EtaPanel& etas,
    std::size_t supersegment) {
  std::vector<std::optional<SummaryStats>> out;
  out.reserve(nsets.size());
  for (const auto& ns : nsets) {
    out.push_back(label_stats(etas, supersegment, ns.neighbor_steps));
  }
  return out;
}

StaticFeatures static_features(const RoadGraph& graph, const EtaPanel& etas,
                               const std::vector<std::size_t>& support_steps,
                               std::size_t supersegment) {
  StaticFeatures f;
  const auto& ss = graph.supersegments()[supersegment];
  f.id = ss.id;
  f.edge_count = ss.edges.size();
  f.length_m = graph.length_m(supersegment);
  f.shortest_s = graph.shortest_time_s(supersegment);
  f.all_support = label_stats(etas, supersegment, support_steps);
  return f;
}

std::vector<std::size_t> supersegment_counters(const RoadGraph& graph,
                                               const FlowPanel& flows,
                                               std::size_t supersegment) {
  std::vector<std::size_t> cols;
  for (NodeId id : graph.path_nodes(supersegment)) {
    const auto it = std::find(flows.counter_ids.begin(), flows.counter_ids.end(), id);
    if (it == flows.counter_ids.end()) continue;
    const auto col = static_cast<std::size_t>(it - flows.counter_ids.begin());
    if (std::find(cols.begin(), cols.end(), col) == cols.end()) cols.push_back(col);
  }
  return cols;
}

NodeflowFeatures nodeflow_features(const MaskedVector& window,
                                   std::size_t n_flow_columns,
                                   const std::vector<std::size_t>& counters) {
  NodeflowFeatures f;
  f.n_counters = counters.size();
  if (counters.empty()) return f;
  std::size_t n_valid = 0;
  for (std::size_t i = 0; i < QueryWindow::kInputSteps; ++i) {
    double sum = 0.0, mx = 0.0;
    std::size_t cnt = 0;
    for (std::size_t c : counters) {
      const std::size_t k = i * n_flow_columns + c;
      if (!window.valid[k]) continue;
      const double v = window.values[k];
      mx = cnt == 0 ? v : std::max(mx, v);
      sum += v;
      ++cnt;
    }
    n_valid += cnt;
    if (cnt == 0) continue;
    f.sum[i] = sum;
    f.mean[i] = sum / static_cast<double>(cnt);
    f.max[i] = mx;
  }
  f.valid_fraction = static_cast<double>(n_valid) /
                     static_cast<double>(counters.size() * QueryWindow::kInputSteps);
  return f;
}

CombinedFeatures combined_features(const std::optional<SummaryStats>& numerator,
                                   const std::optional<SummaryStats>& denominator,
                                   const std::optional<SummaryStats>& anchor,
                                   double shortest_s) {
  CombinedFeatures f;
  if (numerator && denominator && denominator->median >= kRatioDenominatorFloor) {
    f.ratio = numerator->median / denominator->median;
  }
  if (anchor) {
    f.excess_over_free = anchor->median - shortest_s;
    f.lower_band = anchor->median - anchor->std;
    f.upper_band = anchor->median + 2.0 * anchor->std;
  }
  return f;
}

namespace {

struct Layout {
  std::vector<ColumnInfo> columns;
  std::size_t ratio_num = 0, ratio_den = 0, anchor = 0;  // filter indices
};

std::size_t filter_index(const PipelineConfig& cfg, const std::string& label,
                         const char* role) {
  for (std::size_t i = 0; i < cfg.knn_filters.size(); ++i) {
    if (cfg.knn_filters[i].label == label) return i;
  }
  fail(ErrorCode::config, std::string("combined feature ") + role +
                              " refers to unknown filter label '" + label + "'");
}

Layout make_layout(const PipelineConfig& cfg) {
  Layout l;
  auto add = [&](std::string name, FeatureGroup g,
                 FeatureType t = FeatureType::numeric) {
    l.columns.push_back({std::move(name), g, t});
  };
  for (const auto& f : cfg.knn_filters) {
    for (const char* s : kStatSuffixes) {
      add("sim:" + f.label + ":" + s, FeatureGroup::similarity);
    }
  }
  add("static:supersegment_id", FeatureGroup::static_, FeatureType::categorical);
  add("static:edge_count", FeatureGroup::static_);
  add("static:length_m", FeatureGroup::static_);
  add("static:shortest_time_s", FeatureGroup::static_);
  for (const char* s : kStatSuffixes) {
    add(std::string("static:all-NN:") + s, FeatureGroup::static_);
  }
  add("flow:counters", FeatureGroup::nodeflow);
  for (std::size_t i = 0; i < QueryWindow::kInputSteps; ++i) {
    const std::string lag = "flow:t-" + std::to_string(QueryWindow::kInputSteps - i);
    add(lag + ":sum", FeatureGroup::nodeflow);
    add(lag + ":mean", FeatureGroup::nodeflow);
    add(lag + ":max", FeatureGroup::nodeflow);
  }
  add("flow:valid_fraction", FeatureGroup::nodeflow);
  l.ratio_num = filter_index(cfg, cfg.combined.ratio_numerator, "ratio numerator");
  l.ratio_den = filter_index(cfg, cfg.combined.ratio_denominator, "ratio denominator");
  l.anchor = filter_index(cfg, cfg.combined.anchor, "anchor");
  add("comb:median_ratio", FeatureGroup::combined);
  add("comb:median_minus_shortest", FeatureGroup::combined);
  add("comb:median_minus_std", FeatureGroup::combined);
  add("comb:median_plus_2std", FeatureGroup::combined);

  std::set<std::string> names;
  for (const auto& c : l.columns) {
    if (!names.insert(c.name).second) {
      fail(ErrorCode::config, "duplicate feature column '" + c.name + "'");
    }
  }
  return l;
}

class RowWriter {
 public:
  explicit RowWriter(std::size_t n) : values(n, 0.0), valid(n, 0) {}

  void put(std::optional<double> v) {
    if (v) {
      values[pos] = *v;
      valid[pos] = 1;
    } else {
      values[pos] = 0.0;
      valid[pos] = 0;
    }
    ++pos;
  }
  void put_stats(const std::optional<SummaryStats>& s) {
    if (s) {
      for (double v : {s->mean, s->std, s->median, s->p25, s->p75}) put(v);
    } else {
      for (int i = 0; i < 5; ++i) put(std::nullopt);
    }
  }
  void reset() { pos = 0; }

  std::vector<double> values;
  std::vector<std::uint8_t> valid;
  std::size_t pos = 0;
};

}  // namespace

std::vector<ColumnInfo> feature_columns(const PipelineConfig& cfg) {
  return make_layout(cfg).columns;
}

FeatureMatrix build_fold_rows(const PipelineConfig& cfg, const RoadGraph& graph,
                              const FlowPanel& flows, const EtaPanel& etas,
                              const SplitPlan& plan) {
  const Layout layout = make_layout(cfg);
  const std::size_t n_ss = graph.supersegments().size();
  if (etas.data.cols() != n_ss) {
    fail(ErrorCode::integrity, "ETA panel columns do not match the graph");
  }
  if (plan.roles.size() != flows.data.rows() || plan.roles.size() != etas.data.rows()) {
    fail(ErrorCode::range, "split plan length does not match the panels");
  }

  const std::vector<std::size_t> query_steps = plan.steps_with(StepRole::query);
  const std::vector<std::size_t> support_steps = plan.steps_with(StepRole::support);
  if (support_steps.empty()) fail(ErrorCode::split, "split plan has no support steps");

  const SupportSet support = build_support(flows, plan);
  std::optional<Normalization> norm;
  std::vector<Metric> metrics;
  for (const auto& f : cfg.knn_filters) {
    if (std::find(metrics.begin(), metrics.end(), f.metric) == metrics.end()) {
      metrics.push_back(f.metric);
    }
    if (f.metric == Metric::normalized_euclidean && !norm) {
      norm = normalize_support(support);
    }
  }
  const Normalization* norm_ptr = norm ? &*norm : nullptr;

  std::vector<StaticFeatures> statics;
  std::vector<std::vector<std::size_t>> counters;
  for (std::size_t s = 0; s < n_ss; ++s) {
    statics.push_back(static_features(graph, etas, support_steps, s));
    counters.push_back(supersegment_counters(graph, flows, s));
  }

  const std::size_t n_cols = layout.columns.size();
  const std::size_t n_flow = flows.data.cols();
  std::vector<std::vector<double>> block_values(query_steps.size());
  std::vector<std::vector<std::uint8_t>> block_valid(query_steps.size());

  detail::parallel_for(query_steps.size(), detail::resolve_threads(0), [&](std::size_t qi) {
    const std::size_t t = query_steps[qi];
    const MaskedVector window = flatten_window_padded(flows, t);
    const bool sparse = missing_fraction(window) >= cfg.high_missing_threshold;

    std::vector<NeighborSet> nsets(cfg.knn_filters.size());
    for (Metric m : metrics) {
      const Ranking r = sparse ? rank_support_sparse(window, support, m, norm_ptr)
                               : rank_support(window, support, m, norm_ptr);
      for (std::size_t fi = 0; fi < cfg.knn_filters.size(); ++fi) {
        const auto& spec = cfg.knn_filters[fi];
        if (spec.metric != m) continue;
        const std::size_t k = std::min(spec.k, r.steps.size());
        nsets[fi].query_step = t;
        nsets[fi].neighbor_steps.assign(r.steps.begin(), r.steps.begin() + static_cast<std::ptrdiff_t>(k));
        nsets[fi].distances.assign(r.distances.begin(), r.distances.begin() + static_cast<std::ptrdiff_t>(k));
      }
    }

    auto& out_v = block_values[qi];
    auto& out_ok = block_valid[qi];
    out_v.reserve(n_ss * n_cols);
    out_ok.reserve(n_ss * n_cols);
    RowWriter w(n_cols);
    for (std::size_t s = 0; s < n_ss; ++s) {
      w.reset();
      const auto sim = similarity_features(nsets, etas, s);
      for (const auto& st : sim) w.put_stats(st);

      const StaticFeatures& sf = statics[s];
      w.put(static_cast<double>(sf.id));
      w.put(static_cast<double>(sf.edge_count));
      w.put(sf.length_m);
      w.put(sf.shortest_s);
      w.put_stats(sf.all_support);

      const NodeflowFeatures nf = nodeflow_features(window, n_flow, counters[s]);
      w.put(static_cast<double>(nf.n_counters));
      for (std::size_t i = 0; i < QueryWindow::kInputSteps; ++i) {
        w.put(nf.sum[i]);
        w.put(nf.mean[i]);
        w.put(nf.max[i]);
      }
      w.put(nf.valid_fraction);

      const CombinedFeatures cf =
          combined_features(sim[layout.ratio_num], sim[layout.ratio_den],
                            sim[layout.anchor], sf.shortest_s);
      w.put(cf.ratio);
      w.put(cf.excess_over_free);
      w.put(cf.lower_band);
      w.put(cf.upper_band);

      out_v.insert(out_v.end(), w.values.begin(), w.values.end());
      out_ok.insert(out_ok.end(), w.valid.begin(), w.valid.end());
    }
  });

  FeatureMatrix m;
  m.columns = layout.columns;
  const std::size_t n_rows = query_steps.size() * n_ss;
  m.keys.reserve(n_rows);
  m.values.reserve(n_rows * n_cols);
  m.valid.reserve(n_rows * n_cols);
  m.labels.reserve(n_rows);
  m.label_valid.reserve(n_rows);
  for (std::size_t qi = 0; qi < query_steps.size(); ++qi) {
    const std::size_t t = query_steps[qi];
    m.values.insert(m.values.end(), block_values[qi].begin(), block_values[qi].end());
    m.valid.insert(m.valid.end(), block_valid[qi].begin(), block_valid[qi].end());
    for (std::size_t s = 0; s < n_ss; ++s) {
      m.keys.push_back({t, statics[s].id});
      const bool ok = etas.data.valid(t, s);
      m.labels.push_back(ok ? etas.data.value(t, s) : 0.0);
      m.label_valid.push_back(ok ? 1 : 0);
    }
  }
  return m;
}

FeatureMatrix build_training_matrix(const PipelineConfig& cfg,
                                    const RoadGraph& graph,
                                    const FlowPanel& flows,
                                    const EtaPanel& etas, const TimeIndex& time,
                                    int n_days) {
  switch (cfg.split) {
    case SplitStrategy::equal:
      return build_fold_rows(cfg, graph, flows, etas, split_equal(time, n_days));
    case SplitStrategy::daywise: {
      FeatureMatrix m;
      m.columns = feature_columns(cfg);
      for (int d = 0; d < n_days; ++d) {
        m.append(build_fold_rows(cfg, graph, flows, etas, split_daywise(time, d, n_days)));
      }
      return m;
    }
    case SplitStrategy::holdout:
      break;
  }
  fail(ErrorCode::config, "training matrices use the equal or day-wise split");
}

}  // namespace etaknn
