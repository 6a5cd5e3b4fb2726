#include "etaknn/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "json.hpp"

#include "etaknn/error.hpp"
#include "etaknn/stats.hpp"
#include "parallel.hpp"

namespace etaknn {

void GbdtConfig::validate() const {
  if (n_leaves < 2) fail(ErrorCode::config, "n_leaves must be >= 2");
  if (max_depth < 1 || max_depth > 30) {
    fail(ErrorCode::config, "max_depth must be in [1, 30]");
  }
  if (n_leaves > (std::size_t{1} << max_depth)) {
    fail(ErrorCode::config, "n_leaves " + std::to_string(n_leaves) +
                                " exceeds 2^max_depth");
  }
  if (!(feature_subsample > 0.0) || feature_subsample > 1.0) {
    fail(ErrorCode::config, "feature_subsample must be in (0, 1]");
  }
  if (!(learning_rate > 0.0) || learning_rate > 1.0) {
    fail(ErrorCode::config, "learning_rate must be in (0, 1]");
  }
  if (min_samples_leaf < 1) {
    fail(ErrorCode::config, "min_samples_leaf must be >= 1");
  }
  if (n_bins < 2 || n_bins > 65000) {
    fail(ErrorCode::config, "n_bins must be in [2, 65000]");
  }
}

double Tree::evaluate(const double* row, const std::uint8_t* row_valid) const {
  int idx = 0;
  for (;;) {
    const TreeNode& n = nodes[static_cast<std::size_t>(idx)];
    if (n.is_leaf()) return n.value;
    const auto f = static_cast<std::size_t>(n.feature);
    bool go_left;
    if (!row_valid[f]) {
      go_left = n.default_left;
    } else if (!n.left_categories.empty()) {
      go_left = std::binary_search(n.left_categories.begin(),
                                   n.left_categories.end(), row[f]);
    } else {
      go_left = row[f] <= n.threshold;
    }
    idx = go_left ? n.left : n.right;
  }
}

std::size_t Tree::leaf_count() const {
  std::size_t n = 0;
  for (const auto& node : nodes) n += node.is_leaf() ? 1 : 0;
  return n;
}

std::size_t Tree::depth() const {
  if (nodes.empty()) return 0;
  std::vector<std::size_t> depth(nodes.size(), 0);
  std::size_t best = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& n = nodes[i];
    if (n.is_leaf()) {
      best = std::max(best, depth[i]);
      continue;
    }
    depth[static_cast<std::size_t>(n.left)] = depth[i] + 1;
    depth[static_cast<std::size_t>(n.right)] = depth[i] + 1;
  }
  return best;
}

namespace {

constexpr double kMinGain = 1e-12;

using Bin = std::uint16_t;

struct BinnedFeature {
  FeatureType type = FeatureType::numeric;
  std::vector<double> edges;       // numeric thresholds
  std::vector<double> categories;  // categorical values, sorted
  std::size_t n_value_bins = 1;    // missing bin is n_value_bins
  std::vector<Bin> bins;           // per training row
};

BinnedFeature bin_feature(const FeatureMatrix& m, std::size_t col,
                          const std::vector<std::size_t>& rows,
                          std::size_t n_bins) {
  BinnedFeature bf;
  bf.type = m.columns[col].type;
  std::vector<double> vals;
  vals.reserve(rows.size());
  for (std::size_t r : rows) {
    if (m.is_valid(r, col)) vals.push_back(m.value(r, col));
  }
  std::sort(vals.begin(), vals.end());
  std::vector<double> uniq = vals;
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());

  if (bf.type == FeatureType::categorical) {
    bf.categories = uniq;
    bf.n_value_bins = std::max<std::size_t>(1, uniq.size());
  } else {
    if (uniq.size() <= n_bins) {
      for (std::size_t i = 0; i + 1 < uniq.size(); ++i) {
        bf.edges.push_back(uniq[i] + (uniq[i + 1] - uniq[i]) * 0.5);
      }
    } else {
      // Quantile cut points on the sorted sample, snapped to distinct values.
      for (std::size_t b = 1; b < n_bins; ++b) {
        const double v = vals[b * vals.size() / n_bins];
        auto it = std::upper_bound(uniq.begin(), uniq.end(), v);
        if (it == uniq.end()) break;
        const double edge = v + (*it - v) * 0.5;
        if (bf.edges.empty() || edge > bf.edges.back()) bf.edges.push_back(edge);
      }
    }
    bf.n_value_bins = bf.edges.size() + 1;
  }

  bf.bins.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::size_t r = rows[i];
    if (!m.is_valid(r, col)) {
      bf.bins[i] = static_cast<Bin>(bf.n_value_bins);
      continue;
    }
    const double v = m.value(r, col);
    if (bf.type == FeatureType::categorical) {
      auto it = std::lower_bound(bf.categories.begin(), bf.categories.end(), v);
      bf.bins[i] = static_cast<Bin>(it - bf.categories.begin());
    } else {
      auto it = std::lower_bound(bf.edges.begin(), bf.edges.end(), v);
      bf.bins[i] = static_cast<Bin>(it - bf.edges.begin());
    }
  }
  return bf;
}

struct HistCell {
  double grad = 0.0;
  double count = 0.0;
};

using Histogram = std::vector<HistCell>;  // n_value_bins + 1 (missing last)

struct SplitCandidate {
  double gain = 0.0;
  int feature = -1;  // index into the training feature list
  std::size_t bin = 0;            // numeric: left = bins <= bin
  std::vector<std::size_t> left_bins;  // categorical: codes going left
  bool default_left = true;

  bool valid() const noexcept { return feature >= 0 && gain > kMinGain; }
};

struct Leaf {
  std::vector<std::uint32_t> rows;
  std::size_t depth = 0;
  int node = 0;
  std::vector<Histogram> hist;  // per selected feature slot
  SplitCandidate best;
};

double split_gain(double gl, double nl, double gr, double nr, double g,
                  double n) {
  return gl * gl / nl + gr * gr / nr - g * g / n;
}

struct Trainer {
  const GbdtConfig& cfg;
  std::vector<BinnedFeature>& feats;
  const std::vector<double>& residual;
  const std::vector<double>& grad;
  std::vector<std::size_t> selected;  // feature indices for this tree
  std::size_t threads = 1;

  Histogram build_one(const BinnedFeature& bf,
                      const std::vector<std::uint32_t>& rows) const {
    Histogram h(bf.n_value_bins + 1);
    const Bin* bins = bf.bins.data();
    for (std::uint32_t r : rows) {
      HistCell& c = h[bins[r]];
      c.grad += grad[r];
      c.count += 1.0;
    }
    return h;
  }

  void build_hist(Leaf& leaf) const {
    leaf.hist.assign(selected.size(), {});
    detail::parallel_for(selected.size(), threads, [&](std::size_t s) {
      leaf.hist[s] = build_one(feats[selected[s]], leaf.rows);
    });
  }

  SplitCandidate best_numeric(const Histogram& h, std::size_t nvb) const {
    SplitCandidate best;
    const HistCell miss = h[nvb];
    double gt = 0.0, nt = 0.0;
    for (std::size_t b = 0; b < nvb; ++b) {
      gt += h[b].grad;
      nt += h[b].count;
    }
    const double g_all = gt + miss.grad, n_all = nt + miss.count;
    const auto min_leaf = static_cast<double>(cfg.min_samples_leaf);
    double gl = 0.0, nl = 0.0;
    for (std::size_t b = 0; b + 1 < nvb; ++b) {
      gl += h[b].grad;
      nl += h[b].count;
      const double gr = gt - gl, nr = nt - nl;
      if (miss.count == 0.0) {
        if (nl < min_leaf || nr < min_leaf) continue;
        const double gain = split_gain(gl, nl, gr, nr, g_all, n_all);
        if (gain > best.gain) {
          best.gain = gain;
          best.bin = b;
          best.default_left = nl >= nr;
        }
        continue;
      }
      for (bool left : {true, false}) {
        const double gl2 = gl + (left ? miss.grad : 0.0);
        const double nl2 = nl + (left ? miss.count : 0.0);
        const double gr2 = gr + (left ? 0.0 : miss.grad);
        const double nr2 = nr + (left ? 0.0 : miss.count);
        if (nl2 < min_leaf || nr2 < min_leaf) continue;
        const double gain = split_gain(gl2, nl2, gr2, nr2, g_all, n_all);
        if (gain > best.gain) {
          best.gain = gain;
          best.bin = b;
          best.default_left = left;
        }
      }
    }
    return best;
  }

  SplitCandidate best_categorical(const Histogram& h, const BinnedFeature& bf,
                                  const Leaf& leaf) const {
    SplitCandidate best;
    const std::size_t nvb = bf.n_value_bins;
    // Order present categories by the median residual of their rows.
    std::vector<std::vector<double>> per_cat(nvb);
    for (std::uint32_t r : leaf.rows) {
      const Bin b = bf.bins[r];
      if (b < nvb) per_cat[b].push_back(residual[r]);
    }
    std::vector<std::pair<double, std::size_t>> order;
    for (std::size_t c = 0; c < nvb; ++c) {
      if (!per_cat[c].empty()) {
        order.emplace_back(median_inplace(per_cat[c]), c);
      }
    }
    if (order.size() < 2) return best;
    std::sort(order.begin(), order.end());

    const HistCell miss = h[nvb];
    double gt = 0.0, nt = 0.0;
    for (std::size_t b = 0; b < nvb; ++b) {
      gt += h[b].grad;
      nt += h[b].count;
    }
    const double g_all = gt + miss.grad, n_all = nt + miss.count;
    const auto min_leaf = static_cast<double>(cfg.min_samples_leaf);
    double gl = 0.0, nl = 0.0;
    std::size_t best_prefix = 0;
    for (std::size_t i = 0; i + 1 < order.size(); ++i) {
      gl += h[order[i].second].grad;
      nl += h[order[i].second].count;
      const double gr = gt - gl, nr = nt - nl;
      for (bool left : {true, false}) {
        if (miss.count == 0.0 && !left) continue;
        const double gl2 = gl + (left ? miss.grad : 0.0);
        const double nl2 = nl + (left ? miss.count : 0.0);
        const double gr2 = gr + (left ? 0.0 : miss.grad);
        const double nr2 = nr + (left ? 0.0 : miss.count);
        if (nl2 < min_leaf || nr2 < min_leaf) continue;
        const double gain = split_gain(gl2, nl2, gr2, nr2, g_all, n_all);
        if (gain > best.gain) {
          best.gain = gain;
          best_prefix = i + 1;
          best.default_left = miss.count == 0.0 ? nl >= nr : left;
        }
      }
    }
    if (best_prefix > 0) {
      for (std::size_t i = 0; i < best_prefix; ++i) {
        best.left_bins.push_back(order[i].second);
      }
      std::sort(best.left_bins.begin(), best.left_bins.end());
    }
    return best;
  }

  void find_split(Leaf& leaf) const {
    leaf.best = SplitCandidate{};
    if (leaf.depth >= cfg.max_depth ||
        leaf.rows.size() < 2 * cfg.min_samples_leaf) {
      return;
    }
    std::vector<SplitCandidate> cands(selected.size());
    detail::parallel_for(selected.size(), threads, [&](std::size_t s) {
      const BinnedFeature& bf = feats[selected[s]];
      cands[s] = bf.type == FeatureType::categorical
                     ? best_categorical(leaf.hist[s], bf, leaf)
                     : best_numeric(leaf.hist[s], bf.n_value_bins);
      cands[s].feature = static_cast<int>(selected[s]);
    });
    // Fixed-order reduction; ties keep the lower feature index.
    for (auto& c : cands) {
      if (c.gain > leaf.best.gain) leaf.best = std::move(c);
    }
    if (!leaf.best.valid()) leaf.best = SplitCandidate{};
  }

  bool goes_left(const SplitCandidate& s, Bin b) const {
    const BinnedFeature& bf = feats[static_cast<std::size_t>(s.feature)];
    if (b == bf.n_value_bins) return s.default_left;
    if (bf.type == FeatureType::categorical) {
      return std::binary_search(s.left_bins.begin(), s.left_bins.end(),
                                static_cast<std::size_t>(b));
    }
    return b <= s.bin;
  }
};

double leaf_median(const std::vector<std::uint32_t>& rows,
                   const std::vector<double>& residual) {
  std::vector<double> vals;
  vals.reserve(rows.size());
  for (std::uint32_t r : rows) vals.push_back(residual[r]);
  return median_inplace(vals);
}

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

GbdtModel train(const FeatureMatrix& matrix, const GbdtConfig& cfg) {
  cfg.validate();
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < matrix.n_rows(); ++r) {
    if (matrix.label_valid[r] && std::isfinite(matrix.labels[r])) {
      rows.push_back(r);
    }
  }
  if (rows.empty()) fail(ErrorCode::training, "all labels are missing");
  if (rows.size() < cfg.min_samples_leaf) {
    fail(ErrorCode::training, "need at least min_samples_leaf labeled rows");
  }
  if (rows.size() > std::numeric_limits<std::uint32_t>::max()) {
    fail(ErrorCode::training, "too many rows");
  }

  GbdtModel model;
  model.config = cfg;
  for (const auto& c : matrix.columns) {
    model.features.push_back({c.name, c.group, c.type});
  }
  model.gains.assign(matrix.n_cols(), 0.0);

  const std::size_t n = rows.size();
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = matrix.labels[rows[i]];
  {
    std::vector<double> tmp = y;
    model.base_score = median_inplace(tmp);
  }

  std::vector<BinnedFeature> feats(matrix.n_cols());
  for (std::size_t c = 0; c < matrix.n_cols(); ++c) {
    feats[c] = bin_feature(matrix, c, rows, cfg.n_bins);
  }

  std::vector<double> score(n, model.base_score), residual(n), grad(n);
  const std::size_t n_feat = matrix.n_cols();
  const std::size_t n_select =
      n_feat == 0
          ? 0
          : std::clamp<std::size_t>(
                static_cast<std::size_t>(std::llround(
                    cfg.feature_subsample * static_cast<double>(n_feat))),
                1, n_feat);
  Rng rng(sub_seed(cfg.seed, "gbdt.features"));

  for (std::size_t round = 0; round < cfg.n_trees; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      residual[i] = y[i] - score[i];
      grad[i] = sign(residual[i]);
    }

    std::vector<std::size_t> order(n_feat);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    order.resize(n_select);
    std::sort(order.begin(), order.end());

    Trainer tr{cfg, feats, residual, grad, order,
               detail::resolve_threads(cfg.threads)};

    Tree tree;
    tree.nodes.emplace_back();
    std::vector<Leaf> leaves(1);
    leaves[0].rows.resize(n);
    std::iota(leaves[0].rows.begin(), leaves[0].rows.end(), 0u);
    leaves[0].node = 0;
    tr.build_hist(leaves[0]);
    tr.find_split(leaves[0]);

    while (leaves.size() < cfg.n_leaves) {
      std::size_t pick = leaves.size();
      double best_gain = kMinGain;
      for (std::size_t l = 0; l < leaves.size(); ++l) {
        if (leaves[l].best.valid() && leaves[l].best.gain > best_gain) {
          best_gain = leaves[l].best.gain;
          pick = l;
        }
      }
      if (pick == leaves.size()) break;

      Leaf parent = std::move(leaves[pick]);
      const SplitCandidate& s = parent.best;
      const BinnedFeature& bf = feats[static_cast<std::size_t>(s.feature)];
      Leaf left, right;
      left.depth = right.depth = parent.depth + 1;
      for (std::uint32_t r : parent.rows) {
        (tr.goes_left(s, bf.bins[r]) ? left.rows : right.rows).push_back(r);
      }

      TreeNode& pn = tree.nodes[static_cast<std::size_t>(parent.node)];
      pn.feature = s.feature;
      pn.default_left = s.default_left;
      pn.gain = s.gain;
      if (bf.type == FeatureType::categorical) {
        for (std::size_t b : s.left_bins) {
          pn.left_categories.push_back(bf.categories[b]);
        }
      } else {
        pn.threshold = bf.edges[s.bin];
      }
      model.gains[static_cast<std::size_t>(s.feature)] += s.gain;
      const int li = static_cast<int>(tree.nodes.size());
      tree.nodes[static_cast<std::size_t>(parent.node)].left = li;
      tree.nodes[static_cast<std::size_t>(parent.node)].right = li + 1;
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();
      left.node = li;
      right.node = li + 1;

      // Histogram of the smaller child by scan, the larger by subtraction.
      Leaf& small = left.rows.size() <= right.rows.size() ? left : right;
      Leaf& large = &small == &left ? right : left;
      tr.build_hist(small);
      large.hist = std::move(parent.hist);
      for (std::size_t f = 0; f < large.hist.size(); ++f) {
        for (std::size_t b = 0; b < large.hist[f].size(); ++b) {
          large.hist[f][b].grad -= small.hist[f][b].grad;
          large.hist[f][b].count -= small.hist[f][b].count;
        }
      }
      tr.find_split(left);
      tr.find_split(right);
      leaves[pick] = std::move(left);
      leaves.push_back(std::move(right));
    }

    bool all_zero = true;
    for (Leaf& leaf : leaves) {
      const double v = cfg.learning_rate * leaf_median(leaf.rows, residual);
      tree.nodes[static_cast<std::size_t>(leaf.node)].value = v;
      all_zero = all_zero && v == 0.0;
      for (std::uint32_t r : leaf.rows) score[r] += v;
    }
    if (all_zero && tree.nodes.size() == 1) break;  // fixed point reached

    double abs_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) abs_sum += std::abs(y[i] - score[i]);
    model.train_mae.push_back(abs_sum / static_cast<double>(n));
    model.trees.push_back(std::move(tree));
  }
  return model;
}

double predict_raw(const GbdtModel& model, const double* row,
                   const std::uint8_t* row_valid) {
  double s = model.base_score;
  for (const Tree& t : model.trees) s += t.evaluate(row, row_valid);
  return s;
}

std::vector<double> predict(const GbdtModel& model,
                            const FeatureMatrix& matrix) {
  std::vector<std::size_t> cols(model.features.size());
  for (std::size_t f = 0; f < model.features.size(); ++f) {
    const auto idx = matrix.column_index(model.features[f].name);
    if (idx < 0) {
      fail(ErrorCode::schema, "feature matrix lacks model column '" +
                                  model.features[f].name + "'");
    }
    cols[f] = static_cast<std::size_t>(idx);
  }
  std::vector<double> out(matrix.n_rows());
  std::vector<double> row(cols.size());
  std::vector<std::uint8_t> ok(cols.size());
  for (std::size_t r = 0; r < matrix.n_rows(); ++r) {
    for (std::size_t f = 0; f < cols.size(); ++f) {
      ok[f] = matrix.is_valid(r, cols[f]) ? 1 : 0;
      row[f] = ok[f] ? matrix.value(r, cols[f]) : 0.0;
    }
    out[r] = std::clamp(predict_raw(model, row.data(), ok.data()), 1.0,
                        kMaxEtaSeconds);
  }
  return out;
}

std::vector<std::pair<std::string, double>> feature_importance(
    const GbdtModel& model) {
  std::vector<std::pair<std::string, double>> out;
  double total = 0.0;
  for (double g : model.gains) total += g;
  if (!(total > 0.0)) return out;
  for (std::size_t f = 0; f < model.gains.size(); ++f) {
    if (model.gains[f] > 0.0) {
      out.emplace_back(model.features[f].name, model.gains[f] / total);
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.second > b.second;
  });
  return out;
}

namespace {

using nlohmann::json;

constexpr int kModelVersion = 1;
constexpr const char* kModelFormat = "etaknn-gbdt";

json config_to_json(const GbdtConfig& c) {
  return {{"n_trees", c.n_trees},
          {"n_leaves", c.n_leaves},
          {"max_depth", c.max_depth},
          {"feature_subsample", c.feature_subsample},
          {"learning_rate", c.learning_rate},
          {"min_samples_leaf", c.min_samples_leaf},
          {"n_bins", c.n_bins},
          {"seed", c.seed}};
}

GbdtConfig config_from_json(const json& j) {
  GbdtConfig c;
  c.n_trees = j.at("n_trees").get<std::size_t>();
  c.n_leaves = j.at("n_leaves").get<std::size_t>();
  c.max_depth = j.at("max_depth").get<std::size_t>();
  c.feature_subsample = j.at("feature_subsample").get<double>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.min_samples_leaf = j.at("min_samples_leaf").get<std::size_t>();
  c.n_bins = j.at("n_bins").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

}  // namespace

void save_model(const GbdtModel& model, const std::string& path) {
  json j;
  j["format"] = kModelFormat;
  j["version"] = kModelVersion;
  j["base_score"] = model.base_score;
  j["config"] = config_to_json(model.config);
  json feats = json::array();
  for (const auto& f : model.features) {
    feats.push_back({{"name", f.name},
                     {"group", to_string(f.group)},
                     {"type", to_string(f.type)}});
  }
  j["features"] = feats;
  j["gains"] = model.gains;
  j["train_mae"] = model.train_mae;
  json trees = json::array();
  for (const Tree& t : model.trees) {
    json f = json::array(), thr = json::array(), dl = json::array(),
         l = json::array(), r = json::array(), v = json::array(),
         g = json::array(), cats = json::array();
    for (std::size_t i = 0; i < t.nodes.size(); ++i) {
      const TreeNode& n = t.nodes[i];
      f.push_back(n.feature);
      thr.push_back(n.threshold);
      dl.push_back(n.default_left ? 1 : 0);
      l.push_back(n.left);
      r.push_back(n.right);
      v.push_back(n.value);
      g.push_back(n.gain);
      if (!n.left_categories.empty()) {
        cats.push_back(json::array({i, n.left_categories}));
      }
    }
    trees.push_back({{"feature", f},
                     {"threshold", thr},
                     {"default_left", dl},
                     {"left", l},
                     {"right", r},
                     {"value", v},
                     {"gain", g},
                     {"categories", cats}});
  }
  j["trees"] = trees;

  std::ofstream out(path);
  if (!out) fail(ErrorCode::io, "cannot open '" + path + "' for writing");
  out << j.dump();
  if (!out) fail(ErrorCode::io, "failed writing '" + path + "'");
}

GbdtModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open model file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorCode::corrupt_file,
         "model file '" + path + "' is not valid JSON: " + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != kModelFormat) {
      fail(ErrorCode::corrupt_file, "'" + path + "' is not a model file");
    }
    const int version = j.at("version").get<int>();
    if (version != kModelVersion) {
      fail(ErrorCode::version, "model file version " +
                                   std::to_string(version) + ", expected " +
                                   std::to_string(kModelVersion));
    }
    GbdtModel m;
    m.base_score = j.at("base_score").get<double>();
    m.config = config_from_json(j.at("config"));
    for (const auto& f : j.at("features")) {
      m.features.push_back(
          {f.at("name").get<std::string>(),
           parse_feature_group(f.at("group").get<std::string>()),
           parse_feature_type(f.at("type").get<std::string>())});
    }
    m.gains = j.at("gains").get<std::vector<double>>();
    m.train_mae = j.at("train_mae").get<std::vector<double>>();
    if (m.gains.size() != m.features.size()) {
      fail(ErrorCode::corrupt_file, "gain vector does not match features");
    }
    for (const auto& jt : j.at("trees")) {
      const auto f = jt.at("feature").get<std::vector<int>>();
      const auto thr = jt.at("threshold").get<std::vector<double>>();
      const auto dl = jt.at("default_left").get<std::vector<int>>();
      const auto l = jt.at("left").get<std::vector<int>>();
      const auto r = jt.at("right").get<std::vector<int>>();
      const auto v = jt.at("value").get<std::vector<double>>();
      const auto g = jt.at("gain").get<std::vector<double>>();
      const std::size_t nn = f.size();
      if (thr.size() != nn || dl.size() != nn || l.size() != nn ||
          r.size() != nn || v.size() != nn || g.size() != nn || nn == 0) {
        fail(ErrorCode::corrupt_file, "inconsistent tree arrays");
      }
      Tree t;
      t.nodes.resize(nn);
      for (std::size_t i = 0; i < nn; ++i) {
        TreeNode& n = t.nodes[i];
        n.feature = f[i];
        n.threshold = thr[i];
        n.default_left = dl[i] != 0;
        n.left = l[i];
        n.right = r[i];
        n.value = v[i];
        n.gain = g[i];
        if (n.feature >= static_cast<int>(m.features.size())) {
          fail(ErrorCode::corrupt_file, "tree references unknown feature");
        }
        if (!n.is_leaf() &&
            (n.left <= static_cast<int>(i) || n.right <= static_cast<int>(i) ||
             n.left >= static_cast<int>(nn) || n.right >= static_cast<int>(nn))) {
          fail(ErrorCode::corrupt_file, "tree has invalid child links");
        }
      }
      for (const auto& c : jt.at("categories")) {
        const auto idx = c.at(0).get<std::size_t>();
        if (idx >= nn) fail(ErrorCode::corrupt_file, "bad category node");
        t.nodes[idx].left_categories = c.at(1).get<std::vector<double>>();
      }
      m.trees.push_back(std::move(t));
    }
    return m;
  } catch (const json::exception& e) {
    fail(ErrorCode::corrupt_file,
         "model file '" + path + "' is malformed: " + e.what());
  }
}

void save_training_log(const GbdtModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::io, "cannot open '" + path + "' for writing");
  out << "round,train_mae\n";
  out.precision(17);
  for (std::size_t i = 0; i < model.train_mae.size(); ++i) {
    out << (i + 1) << ',' << model.train_mae[i] << '\n';
  }
  if (!out) fail(ErrorCode::io, "failed writing '" + path + "'");
}

}  // namespace etaknn
