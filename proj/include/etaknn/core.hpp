#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace etaknn {

using NodeId = std::int64_t;
using EdgeId = std::int64_t;
using SupersegmentId = std::int64_t;

/// Upper bound on a supersegment travel time in seconds.
inline constexpr double kMaxEtaSeconds = 3600.0;

enum class HighwayClass {
  motorway,
  trunk,
  primary,
  secondary,
  tertiary,
  residential,
  unclassified,
};

std::string_view to_string(HighwayClass c) noexcept;
// Throws Error(parse) on an unknown token.
HighwayClass parse_highway_class(std::string_view token);

struct Node {
  NodeId id = 0;
  double lat = 0.0;
  double lon = 0.0;
  bool has_counter = false;
};

struct Edge {
  EdgeId id = 0;
  NodeId from = 0;
  NodeId to = 0;
  double length_m = 0.0;
  double speed_kph = 0.0;
  HighwayClass highway = HighwayClass::unclassified;
};

struct Supersegment {
  SupersegmentId id = 0;
  std::vector<EdgeId> edges;
};

/// Static road network. Construction never throws; use validate_dataset (or
/// the loaders) to check the invariants.
class RoadGraph {
 public:
  RoadGraph() = default;
  RoadGraph(std::vector<Node> nodes, std::vector<Edge> edges,
            std::vector<Supersegment> supersegments);

  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  const std::vector<Supersegment>& supersegments() const noexcept {
    return supersegments_;
  }

  // Index lookups; return -1 when the id is unknown.
  std::ptrdiff_t node_index(NodeId id) const;
  std::ptrdiff_t edge_index(EdgeId id) const;
  std::ptrdiff_t supersegment_index(SupersegmentId id) const;

  /// Ordered node ids visited by a supersegment (tail of the first edge, then
  /// the head of every edge). Unknown edges are skipped.
  std::vector<NodeId> path_nodes(std::size_t supersegment) const;

  /// Free-flow traversal time in seconds: sum of 3.6 * length / speed_limit.
  double shortest_time_s(std::size_t supersegment) const;
  double length_m(std::size_t supersegment) const;

 private:
  std::vector<Node> nodes_;
  std::vector<Edge> edges_;
  std::vector<Supersegment> supersegments_;
  std::unordered_map<NodeId, std::size_t> node_lookup_;
  std::unordered_map<EdgeId, std::size_t> edge_lookup_;
  std::unordered_map<SupersegmentId, std::size_t> supersegment_lookup_;
};

struct Date {
  int year = 2024;
  int month = 1;
  int day = 1;

  friend bool operator==(const Date&, const Date&) = default;
};

std::string to_string(const Date& d);
Date parse_date(std::string_view text);

/// Maps global step indices to (day, slot-of-day).
class TimeIndex {
 public:
  TimeIndex() = default;
  TimeIndex(Date start, int n_days, int steps_per_day = 96);

  const Date& start_date() const noexcept { return start_; }
  int n_days() const noexcept { return n_days_; }
  int steps_per_day() const noexcept { return steps_per_day_; }
  std::size_t total_steps() const noexcept {
    return static_cast<std::size_t>(n_days_) *
           static_cast<std::size_t>(steps_per_day_);
  }

  int day_of(std::size_t step) const;
  int slot_of(std::size_t step) const;
  std::size_t step_of(int day, int slot) const;

  friend bool operator==(const TimeIndex&, const TimeIndex&) = default;

 private:
  Date start_;
  int n_days_ = 0;
  int steps_per_day_ = 96;
};

enum class CellState : std::uint8_t { missing = 0, observed = 1, imputed = 2 };

inline bool is_valid(CellState s) noexcept { return s != CellState::missing; }

/// Dense row-major T x C matrix with a per-cell validity state.
class Panel {
 public:
  Panel() = default;
  Panel(std::size_t rows, std::size_t cols);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double value(std::size_t r, std::size_t c) const {
    return values_[r * cols_ + c];
  }
  CellState state(std::size_t r, std::size_t c) const {
    return state_[r * cols_ + c];
  }
  bool valid(std::size_t r, std::size_t c) const {
    return is_valid(state(r, c));
  }

  void set(std::size_t r, std::size_t c, double v,
           CellState s = CellState::observed) {
    values_[r * cols_ + c] = v;
    state_[r * cols_ + c] = s;
  }
  void clear(std::size_t r, std::size_t c) {
    values_[r * cols_ + c] = 0.0;
    state_[r * cols_ + c] = CellState::missing;
  }

  std::span<const double> row_values(std::size_t r) const {
    return {values_.data() + r * cols_, cols_};
  }
  std::span<const CellState> row_states(std::size_t r) const {
    return {state_.data() + r * cols_, cols_};
  }

  std::size_t count_valid() const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
  std::vector<CellState> state_;
};

/// Vehicle counts per step (rows) and loop counter (columns).
struct FlowPanel {
  Panel data;
  std::vector<NodeId> counter_ids;
};

/// Supersegment travel times in seconds; columns follow graph order.
struct EtaPanel {
  Panel data;
  std::vector<SupersegmentId> supersegment_ids;
};

/// The four input steps preceding a prediction target.
struct QueryWindow {
  static constexpr std::size_t kInputSteps = 4;

  std::size_t target_step = 0;

  /// Throws Error(range) unless target - 4 >= 0 and target < total_steps.
  static QueryWindow at(std::size_t target, std::size_t total_steps);

  std::size_t input_step(std::size_t i) const {
    return target_step - kInputSteps + i;
  }
};

/// Values with a parallel validity mask (1 = valid).
struct MaskedVector {
  std::vector<double> values;
  std::vector<std::uint8_t> valid;

  std::size_t size() const noexcept { return values.size(); }
  std::size_t count_valid() const;
};

/// Concatenates the four input rows in chronological order.
MaskedVector flatten_window(const FlowPanel& flows, const QueryWindow& w);

/// Same, but input steps before the start of the panel are emitted as fully
/// missing blocks instead of raising.
MaskedVector flatten_window_padded(const FlowPanel& flows,
                                   std::size_t target_step);

struct Violation {
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const noexcept { return violations.empty(); }
};

ValidationReport validate_graph(const RoadGraph& graph);
ValidationReport validate_dataset(const RoadGraph& graph,
                                  const FlowPanel& flows,
                                  const EtaPanel& etas, const TimeIndex& time);

}  // namespace etaknn
