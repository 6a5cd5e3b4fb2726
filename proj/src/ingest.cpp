#include "etaknn/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include "json.hpp"

#include "etaknn/error.hpp"

namespace etaknn {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) fail(ErrorCode::io, "cannot format number");
  return std::string(buf, p);
}

namespace {

// Minimal reader for the unquoted comma-separated files used here.
class CsvReader {
 public:
  explicit CsvReader(const fs::path& path) : path_(path), in_(path) {
    if (!in_) fail(ErrorCode::io, "cannot open '" + path.string() + "'");
  }

  // Checks the header line byte-for-byte against one of the candidates and
  // returns the index of the match.
  std::size_t expect_header(std::initializer_list<std::string_view> options) {
    std::string line;
    if (!next_line(line)) error("missing header");
    std::size_t i = 0;
    for (auto opt : options) {
      if (line == opt) return i;
      ++i;
    }
    std::string expected;
    for (auto opt : options) {
      if (!expected.empty()) expected += "' or '";
      expected += opt;
    }
    error("unexpected header '" + line + "', expected '" + expected + "'");
  }

  std::string header_line() {
    std::string line;
    if (!next_line(line)) error("missing header");
    return line;
  }

  // Splits the next non-empty line; false at end of file.
  bool next(std::vector<std::string_view>& fields) {
    if (!next_line(current_)) return false;
    fields.clear();
    std::string_view rest(current_);
    for (;;) {
      const auto comma = rest.find(',');
      fields.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    return true;
  }

  [[noreturn]] void error(const std::string& what,
                          ErrorCode code = ErrorCode::parse) const {
    fail(code, path_.string() + ":" + std::to_string(line_no_) + ": " + what);
  }

  void expect_fields(const std::vector<std::string_view>& f,
                     std::size_t n) const {
    if (f.size() != n) {
      error("expected " + std::to_string(n) + " fields, got " +
            std::to_string(f.size()));
    }
  }

  double to_double(std::string_view s, const char* what) const {
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v)) {
      error(std::string("malformed ") + what + " '" + std::string(s) + "'");
    }
    return v;
  }

  std::int64_t to_int(std::string_view s, const char* what) const {
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) {
      error(std::string("malformed ") + what + " '" + std::string(s) + "'");
    }
    return v;
  }

 private:
  bool next_line(std::string& line) {
    while (std::getline(in_, line)) {
      ++line_no_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) return true;
    }
    return false;
  }

  fs::path path_;
  std::ifstream in_;
  std::string current_;
  std::size_t line_no_ = 0;
};

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::io, "cannot open '" + path.string() + "' for writing");
  return out;
}

void finish_out(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) fail(ErrorCode::io, "failed writing '" + path.string() + "'");
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorCode::parse, path.string() + ": " + e.what());
  }
}

struct CellKey {
  std::size_t step;
  std::size_t col;
  bool operator<(const CellKey& o) const {
    return step != o.step ? step < o.step : col < o.col;
  }
};

}  // namespace

// ---------------------------------------------------------------- config --

PipelineConfig PipelineConfig::defaults() {
  PipelineConfig cfg;
  cfg.knn_filters = filter_bank(Metric::manhattan, {});
  return cfg;
}

void PipelineConfig::validate() const {
  if (knn_filters.empty()) {
    fail(ErrorCode::config, "at least one KNN filter is required");
  }
  std::set<std::string> labels;
  for (const auto& f : knn_filters) {
    if (f.k < 1) fail(ErrorCode::config, "filter '" + f.label + "' has k < 1");
    if (f.label.empty()) fail(ErrorCode::config, "filter label is empty");
    if (!labels.insert(f.label).second) {
      fail(ErrorCode::config, "duplicate filter label '" + f.label + "'");
    }
  }
  if (!(test_fraction > 0.0) || !(test_fraction < 1.0)) {
    fail(ErrorCode::config, "test_fraction must be in (0, 1)");
  }
  if (!(high_missing_threshold > 0.0) || high_missing_threshold > 1.0) {
    fail(ErrorCode::config, "high_missing_threshold must be in (0, 1]");
  }
  try {
    gp.validate();
  } catch (const Error& e) {
    fail(ErrorCode::config, e.what());
  }
  gbdt.validate();
}

std::vector<FilterSpec> filter_bank(Metric flow_metric,
                                    const std::vector<Metric>& extra_metrics) {
  std::vector<FilterSpec> bank;
  for (std::size_t k : {5, 10, 30, 50, 100}) {
    bank.push_back({k, flow_metric, std::to_string(k) + "-NN"});
  }
  std::vector<Metric> seen{flow_metric};
  for (Metric m : extra_metrics) {
    if (std::find(seen.begin(), seen.end(), m) != seen.end()) continue;
    seen.push_back(m);
    for (std::size_t k : {30, 50}) {
      bank.push_back({k, m, std::to_string(k) + "-NN/" + std::string(to_string(m))});
    }
  }
  return bank;
}

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const char* where) {
  if (!j.is_object()) fail(ErrorCode::config, std::string(where) + " must be an object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) {
      fail(ErrorCode::config,
           "unknown key '" + key + "' in " + std::string(where));
    }
  }
}

Range range_from(const json& j) {
  if (!j.is_array() || j.size() != 2) {
    fail(ErrorCode::config, "ranges are written as [lo, hi]");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

PipelineConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    fail(ErrorCode::config, std::string("config is not valid JSON: ") + e.what());
  }
  PipelineConfig cfg = PipelineConfig::defaults();
  try {
    check_keys(j,
               {"seed", "split", "test_fraction", "high_missing_threshold",
                "knn_filters", "combined", "gp", "gbdt", "paths"},
               "config");
    read_opt(j, "seed", cfg.seed);
    if (j.contains("split")) cfg.split = parse_split(j["split"].get<std::string>());
    read_opt(j, "test_fraction", cfg.test_fraction);
    read_opt(j, "high_missing_threshold", cfg.high_missing_threshold);
    if (j.contains("knn_filters")) {
      cfg.knn_filters.clear();
      for (const auto& f : j["knn_filters"]) {
        check_keys(f, {"k", "metric", "label"}, "knn_filters entry");
        const auto k = f.at("k").get<std::int64_t>();
        if (k < 1) fail(ErrorCode::config, "filter k must be >= 1");
        FilterSpec spec;
        spec.k = static_cast<std::size_t>(k);
        spec.metric = parse_metric(f.at("metric").get<std::string>());
        spec.label = f.contains("label") ? f["label"].get<std::string>()
                                         : std::to_string(k) + "-NN";
        cfg.knn_filters.push_back(spec);
      }
    }
    if (j.contains("combined")) {
      const auto& c = j["combined"];
      check_keys(c, {"ratio_numerator", "ratio_denominator", "anchor"},
                 "combined");
      read_opt(c, "ratio_numerator", cfg.combined.ratio_numerator);
      read_opt(c, "ratio_denominator", cfg.combined.ratio_denominator);
      read_opt(c, "anchor", cfg.combined.anchor);
    }
    if (j.contains("gp")) {
      const auto& g = j["gp"];
      check_keys(g,
                 {"period1", "period2", "l1_range", "l2_range", "noise_range",
                  "window_len", "window_overlap", "grid_points",
                  "max_opt_evals", "trend_scale", "normalize_y",
                  "min_observations", "threads"},
                 "gp");
      read_opt(g, "period1", cfg.gp.period1);
      read_opt(g, "period2", cfg.gp.period2);
      if (g.contains("l1_range")) cfg.gp.l1_range = range_from(g["l1_range"]);
      if (g.contains("l2_range")) cfg.gp.l2_range = range_from(g["l2_range"]);
      if (g.contains("noise_range")) {
        cfg.gp.noise_range = range_from(g["noise_range"]);
      }
      read_opt(g, "window_len", cfg.gp.window_len);
      read_opt(g, "window_overlap", cfg.gp.window_overlap);
      read_opt(g, "grid_points", cfg.gp.grid_points);
      read_opt(g, "max_opt_evals", cfg.gp.max_opt_evals);
      read_opt(g, "trend_scale", cfg.gp.trend_scale);
      read_opt(g, "normalize_y", cfg.gp.normalize_y);
      read_opt(g, "min_observations", cfg.gp.min_observations);
      read_opt(g, "threads", cfg.gp.threads);
    }
    if (j.contains("gbdt")) {
      const auto& g = j["gbdt"];
      check_keys(g,
                 {"n_trees", "n_leaves", "max_depth", "feature_subsample",
                  "learning_rate", "min_samples_leaf", "n_bins", "threads"},
                 "gbdt");
      read_opt(g, "n_trees", cfg.gbdt.n_trees);
      read_opt(g, "n_leaves", cfg.gbdt.n_leaves);
      read_opt(g, "max_depth", cfg.gbdt.max_depth);
      read_opt(g, "feature_subsample", cfg.gbdt.feature_subsample);
      read_opt(g, "learning_rate", cfg.gbdt.learning_rate);
      read_opt(g, "min_samples_leaf", cfg.gbdt.min_samples_leaf);
      read_opt(g, "n_bins", cfg.gbdt.n_bins);
      read_opt(g, "threads", cfg.gbdt.threads);
    }
    if (j.contains("paths")) {
      const auto& p = j["paths"];
      check_keys(p, {"data_dir", "output_dir"}, "paths");
      read_opt(p, "data_dir", cfg.paths.data_dir);
      read_opt(p, "output_dir", cfg.paths.output_dir);
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::config, std::string("bad config value: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

PipelineConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string dump_config(const PipelineConfig& cfg) {
  json filters = json::array();
  for (const auto& f : cfg.knn_filters) {
    filters.push_back(
        {{"k", f.k}, {"metric", to_string(f.metric)}, {"label", f.label}});
  }
  json j = {
      {"seed", cfg.seed},
      {"split", to_string(cfg.split)},
      {"test_fraction", cfg.test_fraction},
      {"high_missing_threshold", cfg.high_missing_threshold},
      {"knn_filters", filters},
      {"combined",
       {{"ratio_numerator", cfg.combined.ratio_numerator},
        {"ratio_denominator", cfg.combined.ratio_denominator},
        {"anchor", cfg.combined.anchor}}},
      {"gp",
       {{"period1", cfg.gp.period1},
        {"period2", cfg.gp.period2},
        {"l1_range", {cfg.gp.l1_range.lo, cfg.gp.l1_range.hi}},
        {"l2_range", {cfg.gp.l2_range.lo, cfg.gp.l2_range.hi}},
        {"noise_range", {cfg.gp.noise_range.lo, cfg.gp.noise_range.hi}},
        {"window_len", cfg.gp.window_len},
        {"window_overlap", cfg.gp.window_overlap},
        {"grid_points", cfg.gp.grid_points},
        {"max_opt_evals", cfg.gp.max_opt_evals},
        {"trend_scale", cfg.gp.trend_scale},
        {"normalize_y", cfg.gp.normalize_y},
        {"min_observations", cfg.gp.min_observations},
        {"threads", cfg.gp.threads}}},
      {"gbdt",
       {{"n_trees", cfg.gbdt.n_trees},
        {"n_leaves", cfg.gbdt.n_leaves},
        {"max_depth", cfg.gbdt.max_depth},
        {"feature_subsample", cfg.gbdt.feature_subsample},
        {"learning_rate", cfg.gbdt.learning_rate},
        {"min_samples_leaf", cfg.gbdt.min_samples_leaf},
        {"n_bins", cfg.gbdt.n_bins},
        {"threads", cfg.gbdt.threads}}},
      {"paths",
       {{"data_dir", cfg.paths.data_dir},
        {"output_dir", cfg.paths.output_dir}}},
  };
  return j.dump(2);
}

// ----------------------------------------------------------------- graph --

RoadGraph load_graph(const fs::path& dir) {
  std::vector<Node> nodes;
  std::vector<Edge> edges;
  std::vector<Supersegment> sss;
  std::vector<std::string_view> f;

  {
    CsvReader csv(dir / kNodesFile);
    csv.expect_header({"id,lat,lon,counter"});
    std::unordered_set<NodeId> ids;
    while (csv.next(f)) {
      csv.expect_fields(f, 4);
      Node n;
      n.id = csv.to_int(f[0], "node id");
      n.lat = csv.to_double(f[1], "latitude");
      n.lon = csv.to_double(f[2], "longitude");
      const auto flag = csv.to_int(f[3], "counter flag");
      if (flag != 0 && flag != 1) csv.error("counter flag must be 0 or 1");
      n.has_counter = flag == 1;
      if (!ids.insert(n.id).second) {
        csv.error("duplicate node id " + std::to_string(n.id),
                  ErrorCode::integrity);
      }
      nodes.push_back(n);
    }
  }
  std::unordered_set<NodeId> node_ids;
  for (const auto& n : nodes) node_ids.insert(n.id);

  {
    CsvReader csv(dir / kEdgesFile);
    csv.expect_header({"id,from,to,length_m,speed_kph,class"});
    std::unordered_set<EdgeId> ids;
    while (csv.next(f)) {
      csv.expect_fields(f, 6);
      Edge e;
      e.id = csv.to_int(f[0], "edge id");
      e.from = csv.to_int(f[1], "node id");
      e.to = csv.to_int(f[2], "node id");
      e.length_m = csv.to_double(f[3], "length");
      e.speed_kph = csv.to_double(f[4], "speed limit");
      try {
        e.highway = parse_highway_class(f[5]);
      } catch (const Error& err) {
        csv.error(err.what());
      }
      if (!(e.length_m > 0.0)) csv.error("edge length must be positive");
      if (!(e.speed_kph > 0.0)) csv.error("speed limit must be positive");
      for (NodeId id : {e.from, e.to}) {
        if (!node_ids.count(id)) {
          csv.error("edge " + std::to_string(e.id) +
                        " references unknown node id " + std::to_string(id),
                    ErrorCode::integrity);
        }
      }
      if (e.from == e.to) {
        csv.error("edge " + std::to_string(e.id) + " is a self loop",
                  ErrorCode::integrity);
      }
      if (!ids.insert(e.id).second) {
        csv.error("duplicate edge id " + std::to_string(e.id),
                  ErrorCode::integrity);
      }
      edges.push_back(e);
    }
  }

  {
    CsvReader csv(dir / kSupersegmentsFile);
    csv.expect_header({"id,edge_ids"});
    std::unordered_set<SupersegmentId> ids;
    while (csv.next(f)) {
      csv.expect_fields(f, 2);
      Supersegment s;
      s.id = csv.to_int(f[0], "supersegment id");
      std::string_view rest = f[1];
      while (!rest.empty()) {
        const auto bar = rest.find('|');
        s.edges.push_back(csv.to_int(rest.substr(0, bar), "edge id"));
        if (bar == std::string_view::npos) break;
        rest.remove_prefix(bar + 1);
      }
      if (s.edges.empty()) {
        csv.error("supersegment " + std::to_string(s.id) +
                      " has an empty edge list",
                  ErrorCode::integrity);
      }
      if (!ids.insert(s.id).second) {
        csv.error("duplicate supersegment id " + std::to_string(s.id),
                  ErrorCode::integrity);
      }
      sss.push_back(std::move(s));
    }
  }

  RoadGraph graph(std::move(nodes), std::move(edges), std::move(sss));
  const ValidationReport report = validate_graph(graph);
  if (!report.ok()) {
    fail(ErrorCode::integrity, report.violations.front().message);
  }
  return graph;
}

void save_graph(const RoadGraph& graph, const fs::path& dir) {
  fs::create_directories(dir);
  {
    const fs::path p = dir / kNodesFile;
    auto out = open_out(p);
    out << "id,lat,lon,counter\n";
    for (const auto& n : graph.nodes()) {
      out << n.id << ',' << format_double(n.lat) << ','
          << format_double(n.lon) << ',' << (n.has_counter ? 1 : 0) << '\n';
    }
    finish_out(out, p);
  }
  {
    const fs::path p = dir / kEdgesFile;
    auto out = open_out(p);
    out << "id,from,to,length_m,speed_kph,class\n";
    for (const auto& e : graph.edges()) {
      out << e.id << ',' << e.from << ',' << e.to << ','
          << format_double(e.length_m) << ',' << format_double(e.speed_kph)
          << ',' << to_string(e.highway) << '\n';
    }
    finish_out(out, p);
  }
  {
    const fs::path p = dir / kSupersegmentsFile;
    auto out = open_out(p);
    out << "id,edge_ids\n";
    for (const auto& s : graph.supersegments()) {
      out << s.id << ',';
      for (std::size_t i = 0; i < s.edges.size(); ++i) {
        if (i) out << '|';
        out << s.edges[i];
      }
      out << '\n';
    }
    finish_out(out, p);
  }
}

TimeIndex load_time_index(const fs::path& path) {
  const json j = read_json(path);
  try {
    return TimeIndex(parse_date(j.at("start_date").get<std::string>()),
                     j.at("n_days").get<int>(),
                     j.value("steps_per_day", 96));
  } catch (const json::exception& e) {
    fail(ErrorCode::parse, path.string() + ": " + e.what());
  }
}

void save_time_index(const TimeIndex& time, const fs::path& path) {
  auto out = open_out(path);
  json j = {{"start_date", to_string(time.start_date())},
            {"n_days", time.n_days()},
            {"steps_per_day", time.steps_per_day()}};
  out << j.dump(2) << '\n';
  finish_out(out, path);
}

// ---------------------------------------------------------------- panels --

namespace {

// Reads a long-form panel into `panel` using `column_of` to map ids.
template <typename ColumnOf, typename Check>
void read_long_panel(CsvReader& csv, Panel& panel, ColumnOf column_of,
                     Check check_value) {
  std::vector<std::string_view> f;
  std::set<CellKey> seen;
  while (csv.next(f)) {
    csv.expect_fields(f, 3);
    const std::int64_t step = csv.to_int(f[0], "step");
    if (step < 0 || static_cast<std::size_t>(step) >= panel.rows()) {
      csv.error("step " + std::to_string(step) + " outside the time index");
    }
    const std::int64_t id = csv.to_int(f[1], "id");
    const std::size_t col = column_of(id);
    const auto s = static_cast<std::size_t>(step);
    if (!seen.insert({s, col}).second) {
      csv.error("duplicate cell for step " + std::to_string(step) + " id " +
                std::to_string(id));
    }
    if (f[2].empty()) continue;  // explicit missing
    const double v = csv.to_double(f[2], "value");
    check_value(v);
    panel.set(s, col, v, CellState::observed);
  }
}

}  // namespace

FlowPanel load_flow_panel(const fs::path& path, const TimeIndex& time,
                          const RoadGraph& graph) {
  FlowPanel fp;
  std::unordered_map<NodeId, std::size_t> col_of;
  for (const auto& n : graph.nodes()) {
    if (!n.has_counter) continue;
    col_of.emplace(n.id, fp.counter_ids.size());
    fp.counter_ids.push_back(n.id);
  }
  fp.data = Panel(time.total_steps(), fp.counter_ids.size());
  CsvReader csv(path);
  csv.expect_header({"step,id,value"});
  read_long_panel(
      csv, fp.data,
      [&](std::int64_t id) {
        auto it = col_of.find(id);
        if (it == col_of.end()) {
          csv.error("unknown counter id " + std::to_string(id),
                    ErrorCode::integrity);
        }
        return it->second;
      },
      [&](double v) {
        if (v < 0.0) csv.error("negative count " + format_double(v));
      });
  return fp;
}

void save_flow_panel(const FlowPanel& flows, const fs::path& path) {
  auto out = open_out(path);
  out << "step,id,value\n";
  for (std::size_t t = 0; t < flows.data.rows(); ++t) {
    for (std::size_t c = 0; c < flows.data.cols(); ++c) {
      if (!flows.data.valid(t, c)) continue;
      out << t << ',' << flows.counter_ids[c] << ','
          << format_double(flows.data.value(t, c)) << '\n';
    }
  }
  finish_out(out, path);
}

EtaPanel load_eta_panel(const fs::path& path, const TimeIndex& time,
                        const RoadGraph& graph) {
  EtaPanel ep;
  for (const auto& s : graph.supersegments()) ep.supersegment_ids.push_back(s.id);
  ep.data = Panel(time.total_steps(), ep.supersegment_ids.size());
  CsvReader csv(path);
  csv.expect_header({"step,id,value", "step,supersegment_id,eta_s"});
  read_long_panel(
      csv, ep.data,
      [&](std::int64_t id) {
        const auto idx = graph.supersegment_index(id);
        if (idx < 0) {
          csv.error("unknown supersegment id " + std::to_string(id),
                    ErrorCode::integrity);
        }
        return static_cast<std::size_t>(idx);
      },
      [&](double v) {
        if (!(v > 0.0) || v > kMaxEtaSeconds) {
          csv.error("travel time " + format_double(v) + " outside (0, 3600]");
        }
      });
  return ep;
}

void save_eta_panel(const EtaPanel& etas, const fs::path& path) {
  auto out = open_out(path);
  out << "step,id,value\n";
  for (std::size_t t = 0; t < etas.data.rows(); ++t) {
    for (std::size_t s = 0; s < etas.data.cols(); ++s) {
      if (!etas.data.valid(t, s)) continue;
      out << t << ',' << etas.supersegment_ids[s] << ','
          << format_double(etas.data.value(t, s)) << '\n';
    }
  }
  finish_out(out, path);
}

void save_predictions(const EtaPanel& preds, const fs::path& path) {
  std::vector<LongCell> cells;
  for (std::size_t t = 0; t < preds.data.rows(); ++t) {
    for (std::size_t s = 0; s < preds.data.cols(); ++s) {
      if (!preds.data.valid(t, s)) continue;
      cells.push_back({t, preds.supersegment_ids[s], preds.data.value(t, s)});
    }
  }
  save_prediction_cells(cells, path);
}

void save_prediction_cells(const std::vector<LongCell>& cells,
                           const fs::path& path) {
  for (const auto& c : cells) {
    if (!std::isfinite(c.value)) {
      fail(ErrorCode::parameter, "prediction for step " +
                                     std::to_string(c.step) + " id " +
                                     std::to_string(c.id) + " is not finite");
    }
  }
  auto out = open_out(path);
  out << "step,supersegment_id,eta_s\n";
  for (const auto& c : cells) {
    out << c.step << ',' << c.id << ',' << format_double(c.value) << '\n';
  }
  finish_out(out, path);
}

std::vector<LongCell> load_long_cells(const fs::path& path) {
  CsvReader csv(path);
  const std::string header = csv.header_line();
  if (std::count(header.begin(), header.end(), ',') != 2 ||
      header.rfind("step,", 0) != 0) {
    csv.error("expected a three-column long-form header starting with 'step'");
  }
  std::vector<LongCell> cells;
  std::vector<std::string_view> f;
  while (csv.next(f)) {
    csv.expect_fields(f, 3);
    if (f[2].empty()) continue;
    const std::int64_t step = csv.to_int(f[0], "step");
    if (step < 0) csv.error("negative step");
    cells.push_back({static_cast<std::size_t>(step), csv.to_int(f[1], "id"),
                     csv.to_double(f[2], "value")});
  }
  return cells;
}

// --------------------------------------------------------------- dataset --

Dataset load_dataset(const fs::path& dir, const fs::path& flows_override) {
  Dataset ds;
  ds.graph = load_graph(dir);
  ds.time = load_time_index(dir / kTimeFile);
  ds.flows = load_flow_panel(
      flows_override.empty() ? dir / kFlowsFile : flows_override, ds.time,
      ds.graph);
  ds.etas = load_eta_panel(dir / kEtasFile, ds.time, ds.graph);
  return ds;
}

void save_dataset(const Dataset& ds, const fs::path& dir) {
  save_graph(ds.graph, dir);
  save_time_index(ds.time, dir / kTimeFile);
  save_flow_panel(ds.flows, dir / kFlowsFile);
  save_eta_panel(ds.etas, dir / kEtasFile);
}

// ---------------------------------------------------------------- matrix --

namespace {

constexpr const char* kMatrixFormat = "etaknn-features";
constexpr int kMatrixVersion = 1;

fs::path sidecar_of(const fs::path& path) {
  return fs::path(path.string() + ".json");
}

}  // namespace

void save_matrix(const FeatureMatrix& m, const fs::path& path) {
  {
    json cols = json::array();
    for (const auto& c : m.columns) {
      cols.push_back({{"name", c.name},
                      {"group", to_string(c.group)},
                      {"type", to_string(c.type)}});
    }
    json meta = {{"format", kMatrixFormat},
                 {"version", kMatrixVersion},
                 {"rows", m.n_rows()},
                 {"columns", cols}};
    const fs::path sp = sidecar_of(path);
    auto out = open_out(sp);
    out << meta.dump(2) << '\n';
    finish_out(out, sp);
  }
  auto out = open_out(path);
  out << "step,supersegment_id";
  for (const auto& c : m.columns) out << ',' << c.name;
  out << ",label\n";
  std::string line;
  for (std::size_t r = 0; r < m.n_rows(); ++r) {
    line.clear();
    line += std::to_string(m.keys[r].step);
    line += ',';
    line += std::to_string(m.keys[r].supersegment);
    for (std::size_t c = 0; c < m.n_cols(); ++c) {
      line += ',';
      if (m.is_valid(r, c)) line += format_double(m.value(r, c));
    }
    line += ',';
    if (m.label_valid[r]) line += format_double(m.labels[r]);
    line += '\n';
    out << line;
  }
  finish_out(out, path);
}

FeatureMatrix load_matrix(const fs::path& path) {
  FeatureMatrix m;
  const json meta = read_json(sidecar_of(path));
  try {
    if (meta.at("format").get<std::string>() != kMatrixFormat) {
      fail(ErrorCode::schema, "not a feature matrix sidecar");
    }
    if (meta.at("version").get<int>() != kMatrixVersion) {
      fail(ErrorCode::version, "unsupported feature matrix version");
    }
    for (const auto& c : meta.at("columns")) {
      m.columns.push_back({c.at("name").get<std::string>(),
                           parse_feature_group(c.at("group").get<std::string>()),
                           parse_feature_type(c.at("type").get<std::string>())});
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::schema, sidecar_of(path).string() + ": " + e.what());
  }

  CsvReader csv(path);
  std::string expected = "step,supersegment_id";
  for (const auto& c : m.columns) expected += "," + c.name;
  expected += ",label";
  csv.expect_header({expected});
  std::vector<std::string_view> f;
  const std::size_t width = m.n_cols() + 3;
  std::vector<double> row(m.n_cols());
  std::vector<std::uint8_t> ok(m.n_cols());
  while (csv.next(f)) {
    csv.expect_fields(f, width);
    const auto step = csv.to_int(f[0], "step");
    if (step < 0) csv.error("negative step");
    RowKey key{static_cast<std::size_t>(step), csv.to_int(f[1], "id")};
    for (std::size_t c = 0; c < m.n_cols(); ++c) {
      const auto s = f[c + 2];
      ok[c] = s.empty() ? 0 : 1;
      row[c] = s.empty() ? 0.0 : csv.to_double(s, "feature value");
    }
    std::optional<double> label;
    if (!f.back().empty()) label = csv.to_double(f.back(), "label");
    m.append_row(key, row, ok, label);
  }
  return m;
}

}  // namespace etaknn
