#include "etaknn/core.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <unordered_set>

#include "etaknn/error.hpp"
#include "etaknn/log.hpp"

namespace etaknn {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::parse: return "parse error";
    case ErrorCode::integrity: return "integrity error";
    case ErrorCode::range: return "range error";
    case ErrorCode::parameter: return "parameter error";
    case ErrorCode::fit: return "fit error";
    case ErrorCode::split: return "split error";
    case ErrorCode::config: return "config error";
    case ErrorCode::schema: return "schema error";
    case ErrorCode::training: return "training error";
    case ErrorCode::corrupt_file: return "corrupt file";
    case ErrorCode::version: return "version mismatch";
    case ErrorCode::metric: return "undefined metric";
    case ErrorCode::io: return "i/o error";
    case ErrorCode::generation: return "generation error";
  }
  return "error";
}

namespace {

constexpr std::array<std::pair<HighwayClass, std::string_view>, 7>
    kHighwayNames{{
        {HighwayClass::motorway, "motorway"},
        {HighwayClass::trunk, "trunk"},
        {HighwayClass::primary, "primary"},
        {HighwayClass::secondary, "secondary"},
        {HighwayClass::tertiary, "tertiary"},
        {HighwayClass::residential, "residential"},
        {HighwayClass::unclassified, "unclassified"},
    }};

}  // namespace

std::string_view to_string(HighwayClass c) noexcept {
  for (const auto& [k, name] : kHighwayNames) {
    if (k == c) return name;
  }
  return "unclassified";
}

HighwayClass parse_highway_class(std::string_view token) {
  for (const auto& [k, name] : kHighwayNames) {
    if (name == token) return k;
  }
  fail(ErrorCode::parse,
       "unknown highway class '" + std::string(token) + "'");
}

RoadGraph::RoadGraph(std::vector<Node> nodes, std::vector<Edge> edges,
                     std::vector<Supersegment> supersegments)
    : nodes_(std::move(nodes)),
      edges_(std::move(edges)),
      supersegments_(std::move(supersegments)) {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    node_lookup_.emplace(nodes_[i].id, i);
  }
  for (std::size_t i = 0; i < edges_.size(); ++i) {
    edge_lookup_.emplace(edges_[i].id, i);
  }
  for (std::size_t i = 0; i < supersegments_.size(); ++i) {
    supersegment_lookup_.emplace(supersegments_[i].id, i);
  }
}

std::ptrdiff_t RoadGraph::node_index(NodeId id) const {
  auto it = node_lookup_.find(id);
  return it == node_lookup_.end() ? -1
                                  : static_cast<std::ptrdiff_t>(it->second);
}

std::ptrdiff_t RoadGraph::edge_index(EdgeId id) const {
  auto it = edge_lookup_.find(id);
  return it == edge_lookup_.end() ? -1
                                  : static_cast<std::ptrdiff_t>(it->second);
}

std::ptrdiff_t RoadGraph::supersegment_index(SupersegmentId id) const {
  auto it = supersegment_lookup_.find(id);
  return it == supersegment_lookup_.end()
             ? -1
             : static_cast<std::ptrdiff_t>(it->second);
}

std::vector<NodeId> RoadGraph::path_nodes(std::size_t supersegment) const {
  std::vector<NodeId> out;
  for (EdgeId eid : supersegments_.at(supersegment).edges) {
    auto e = edge_index(eid);
    if (e < 0) continue;
    const Edge& edge = edges_[static_cast<std::size_t>(e)];
    if (out.empty()) out.push_back(edge.from);
    out.push_back(edge.to);
  }
  return out;
}

double RoadGraph::shortest_time_s(std::size_t supersegment) const {
  double total = 0.0;
  for (EdgeId eid : supersegments_.at(supersegment).edges) {
    auto e = edge_index(eid);
    if (e < 0) continue;
    const Edge& edge = edges_[static_cast<std::size_t>(e)];
    total += 3.6 * edge.length_m / edge.speed_kph;
  }
  return total;
}

double RoadGraph::length_m(std::size_t supersegment) const {
  double total = 0.0;
  for (EdgeId eid : supersegments_.at(supersegment).edges) {
    auto e = edge_index(eid);
    if (e >= 0) total += edges_[static_cast<std::size_t>(e)].length_m;
  }
  return total;
}

std::string to_string(const Date& d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", d.year, d.month, d.day);
  return buf;
}

Date parse_date(std::string_view text) {
  Date d;
  auto bad = [&] {
    fail(ErrorCode::parse, "malformed date '" + std::string(text) +
                               "', expected YYYY-MM-DD");
  };
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') bad();
  auto field = [&](std::size_t pos, std::size_t len, int& out) {
    auto [p, ec] = std::from_chars(text.data() + pos, text.data() + pos + len,
                                   out);
    if (ec != std::errc() || p != text.data() + pos + len) bad();
  };
  field(0, 4, d.year);
  field(5, 2, d.month);
  field(8, 2, d.day);
  if (d.month < 1 || d.month > 12 || d.day < 1 || d.day > 31) bad();
  return d;
}

TimeIndex::TimeIndex(Date start, int n_days, int steps_per_day)
    : start_(start), n_days_(n_days), steps_per_day_(steps_per_day) {
  if (n_days < 1) fail(ErrorCode::parameter, "time index needs >= 1 day");
  if (steps_per_day < 1) {
    fail(ErrorCode::parameter, "time index needs >= 1 step per day");
  }
}

int TimeIndex::day_of(std::size_t step) const {
  if (step >= total_steps()) {
    fail(ErrorCode::range, "step " + std::to_string(step) + " out of range");
  }
  return static_cast<int>(step / static_cast<std::size_t>(steps_per_day_));
}

int TimeIndex::slot_of(std::size_t step) const {
  if (step >= total_steps()) {
    fail(ErrorCode::range, "step " + std::to_string(step) + " out of range");
  }
  return static_cast<int>(step % static_cast<std::size_t>(steps_per_day_));
}

std::size_t TimeIndex::step_of(int day, int slot) const {
  if (day < 0 || day >= n_days_ || slot < 0 || slot >= steps_per_day_) {
    fail(ErrorCode::range, "day/slot (" + std::to_string(day) + ", " +
                               std::to_string(slot) + ") out of range");
  }
  return static_cast<std::size_t>(day) *
             static_cast<std::size_t>(steps_per_day_) +
         static_cast<std::size_t>(slot);
}

Panel::Panel(std::size_t rows, std::size_t cols)
    : rows_(rows),
      cols_(cols),
      values_(rows * cols, 0.0),
      state_(rows * cols, CellState::missing) {}

std::size_t Panel::count_valid() const {
  std::size_t n = 0;
  for (CellState s : state_) n += is_valid(s) ? 1 : 0;
  return n;
}

QueryWindow QueryWindow::at(std::size_t target, std::size_t total_steps) {
  if (target < kInputSteps || target >= total_steps) {
    fail(ErrorCode::range, "query window for step " + std::to_string(target) +
                               " needs steps [t-4, t] within [0, " +
                               std::to_string(total_steps) + ")");
  }
  return QueryWindow{target};
}

std::size_t MaskedVector::count_valid() const {
  std::size_t n = 0;
  for (auto v : valid) n += v ? 1 : 0;
  return n;
}

MaskedVector flatten_window(const FlowPanel& flows, const QueryWindow& w) {
  if (w.target_step < QueryWindow::kInputSteps ||
      w.target_step >= flows.data.rows()) {
    fail(ErrorCode::range, "query window for step " +
                               std::to_string(w.target_step) +
                               " is outside the flow panel");
  }
  return flatten_window_padded(flows, w.target_step);
}

MaskedVector flatten_window_padded(const FlowPanel& flows,
                                   std::size_t target_step) {
  const std::size_t c = flows.data.cols();
  MaskedVector out;
  out.values.assign(QueryWindow::kInputSteps * c, 0.0);
  out.valid.assign(QueryWindow::kInputSteps * c, 0);
  for (std::size_t i = 0; i < QueryWindow::kInputSteps; ++i) {
    if (target_step + i < QueryWindow::kInputSteps) continue;
    const std::size_t step = target_step - QueryWindow::kInputSteps + i;
    if (step >= flows.data.rows()) continue;
    auto vals = flows.data.row_values(step);
    auto states = flows.data.row_states(step);
    for (std::size_t j = 0; j < c; ++j) {
      if (is_valid(states[j])) {
        out.values[i * c + j] = vals[j];
        out.valid[i * c + j] = 1;
      }
    }
  }
  return out;
}

ValidationReport validate_graph(const RoadGraph& graph) {
  ValidationReport report;
  auto add = [&](std::string msg) {
    report.violations.push_back({std::move(msg)});
  };

  std::unordered_set<NodeId> node_ids;
  for (const Node& n : graph.nodes()) {
    if (!node_ids.insert(n.id).second) {
      add("graph: duplicate node id " + std::to_string(n.id));
    }
  }
  std::unordered_set<EdgeId> edge_ids;
  for (const Edge& e : graph.edges()) {
    const std::string tag = "graph: edge " + std::to_string(e.id);
    if (!edge_ids.insert(e.id).second) add(tag + " has a duplicate id");
    if (graph.node_index(e.from) < 0) {
      add(tag + " references unknown node " + std::to_string(e.from));
    }
    if (graph.node_index(e.to) < 0) {
      add(tag + " references unknown node " + std::to_string(e.to));
    }
    if (e.from == e.to) add(tag + " is a self loop");
    if (!(e.length_m > 0.0) || !std::isfinite(e.length_m)) {
      add(tag + " has non-positive length");
    }
    if (!(e.speed_kph > 0.0) || !std::isfinite(e.speed_kph)) {
      add(tag + " has non-positive speed limit");
    }
  }
  std::unordered_set<SupersegmentId> ss_ids;
  for (const Supersegment& s : graph.supersegments()) {
    const std::string tag = "graph: supersegment " + std::to_string(s.id);
    if (!ss_ids.insert(s.id).second) add(tag + " has a duplicate id");
    if (s.edges.empty()) {
      add(tag + " has an empty edge list");
      continue;
    }
    const Edge* prev = nullptr;
    for (std::size_t i = 0; i < s.edges.size(); ++i) {
      auto idx = graph.edge_index(s.edges[i]);
      if (idx < 0) {
        add(tag + " references unknown edge " + std::to_string(s.edges[i]));
        prev = nullptr;
        continue;
      }
      const Edge& e = graph.edges()[static_cast<std::size_t>(idx)];
      if (prev != nullptr && prev->to != e.from) {
        add(tag + " is not a connected path: edge " + std::to_string(prev->id) +
            " ends at node " + std::to_string(prev->to) + " but edge " +
            std::to_string(e.id) + " starts at node " + std::to_string(e.from));
      }
      prev = &e;
    }
  }
  return report;
}

ValidationReport validate_dataset(const RoadGraph& graph,
                                  const FlowPanel& flows,
                                  const EtaPanel& etas, const TimeIndex& time) {
  ValidationReport report = validate_graph(graph);
  auto add = [&](std::string msg) {
    report.violations.push_back({std::move(msg)});
  };
  const std::size_t t_steps = time.total_steps();

  if (flows.data.rows() != t_steps) {
    add("flows: panel has " + std::to_string(flows.data.rows()) +
        " steps, time index has " + std::to_string(t_steps));
  }
  if (flows.data.cols() != flows.counter_ids.size()) {
    add("flows: column count does not match counter id list");
  }
  std::unordered_set<NodeId> seen;
  for (NodeId id : flows.counter_ids) {
    if (!seen.insert(id).second) {
      add("flows: duplicate counter id " + std::to_string(id));
    }
    auto idx = graph.node_index(id);
    if (idx < 0) {
      add("flows: counter " + std::to_string(id) + " is not a graph node");
    } else if (!graph.nodes()[static_cast<std::size_t>(idx)].has_counter) {
      add("flows: node " + std::to_string(id) + " has no counter flag");
    }
  }
  for (std::size_t t = 0; t < flows.data.rows(); ++t) {
    for (std::size_t c = 0; c < flows.data.cols(); ++c) {
      if (!flows.data.valid(t, c)) continue;
      const double v = flows.data.value(t, c);
      if (!std::isfinite(v) || v < 0.0) {
        add("flows: step " + std::to_string(t) + " counter " +
            std::to_string(c < flows.counter_ids.size() ? flows.counter_ids[c]
                                                        : -1) +
            " has invalid count " + std::to_string(v));
      }
    }
  }

  if (etas.data.rows() != t_steps) {
    add("etas: panel has " + std::to_string(etas.data.rows()) +
        " steps, time index has " + std::to_string(t_steps));
  }
  if (etas.data.cols() != graph.supersegments().size() ||
      etas.supersegment_ids.size() != etas.data.cols()) {
    add("etas: column count does not match the supersegment list");
  }
  for (std::size_t t = 0; t < etas.data.rows(); ++t) {
    for (std::size_t s = 0; s < etas.data.cols(); ++s) {
      if (!etas.data.valid(t, s)) continue;
      const double v = etas.data.value(t, s);
      if (!(v > 0.0) || !(v <= kMaxEtaSeconds)) {
        add("etas: step " + std::to_string(t) + " supersegment " +
            std::to_string(s < etas.supersegment_ids.size()
                               ? etas.supersegment_ids[s]
                               : -1) +
            " has travel time " + std::to_string(v) +
            " outside (0, 3600]");
      }
    }
  }
  return report;
}

namespace {

void stderr_sink(LogLevel level, std::string_view msg) {
  std::fprintf(stderr, "[etaknn] %s: %.*s\n",
               level == LogLevel::warning ? "warning" : "info",
               static_cast<int>(msg.size()), msg.data());
}

// Sinks may be called from worker threads; calls are serialized here.
std::mutex& sink_mutex() {
  static std::mutex mu;
  return mu;
}

LogSink& sink_ref() {
  static LogSink sink = stderr_sink;
  return sink;
}

}  // namespace

void set_log_sink(LogSink sink) {
  std::lock_guard lock(sink_mutex());
  sink_ref() = std::move(sink);
}

void reset_log_sink() { set_log_sink(stderr_sink); }

void log_message(LogLevel level, std::string_view message) {
  std::lock_guard lock(sink_mutex());
  auto& sink = sink_ref();
  if (sink) sink(level, message);
}

}  // namespace etaknn
