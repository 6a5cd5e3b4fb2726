#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "etaknn/core.hpp"

namespace etaknn {

enum class Metric { manhattan, euclidean, normalized_euclidean };

std::string_view to_string(Metric m) noexcept;
Metric parse_metric(std::string_view token);  // Error(config) when unknown

struct FilterSpec {
  std::size_t k = 10;
  Metric metric = Metric::manhattan;
  std::string label;
};

enum class SplitStrategy { equal, daywise, holdout };
enum class StepRole : std::uint8_t { excluded = 0, query = 1, support = 2 };

std::string_view to_string(SplitStrategy s) noexcept;
SplitStrategy parse_split(std::string_view token);  // "equal" | "day-wise"

struct SplitPlan {
  std::vector<StepRole> roles;  // one per step
  SplitStrategy strategy = SplitStrategy::equal;
  int fold = 0;

  std::vector<std::size_t> steps_with(StepRole role) const;
};

/// Alternating weeks over the first `n_days` days (all days when negative):
/// weeks 0, 2, ... are query, weeks 1, 3, ... support. Needs >= 14 days.
SplitPlan split_equal(const TimeIndex& time, int n_days = -1);

/// All steps of `day` are query; every other day in [0, n_days) is support.
SplitPlan split_daywise(const TimeIndex& time, int day, int n_days = -1);

/// Days [0, n_train_days) support, the rest query.
SplitPlan split_holdout(const TimeIndex& time, int n_train_days);

/// Per-dimension statistics for z-scoring; `usable` is 0 for dimensions with
/// no valid support entry.
struct Normalization {
  std::vector<double> mean;
  std::vector<double> std;
  std::vector<std::uint8_t> usable;
};

inline constexpr double kStdFloor = 1e-6;

/// Row-major matrix of flattened windows for a set of support steps.
class SupportSet {
 public:
  SupportSet() = default;
  explicit SupportSet(std::size_t dims) : dims_(dims) {}

  void add(std::size_t step, const MaskedVector& v);

  std::size_t size() const noexcept { return steps_.size(); }
  std::size_t dims() const noexcept { return dims_; }
  std::size_t step(std::size_t i) const { return steps_[i]; }
  const std::vector<std::size_t>& steps() const noexcept { return steps_; }
  const double* values(std::size_t i) const { return &values_[i * dims_]; }
  const std::uint8_t* valid(std::size_t i) const { return &valid_[i * dims_]; }

 private:
  std::size_t dims_ = 0;
  std::vector<std::size_t> steps_;
  std::vector<double> values_;
  std::vector<std::uint8_t> valid_;
};

/// Builds the support matrix from the windows of every support step of
/// `plan` (steps before t = 4 are padded as missing).
SupportSet build_support(const FlowPanel& flows, const SplitPlan& plan);

Normalization normalize_support(const SupportSet& support);

/// Masked distance over the dimensions V valid in both vectors, rescaled by
/// D / |V| where D counts the dimensions valid in either. Returns nullopt
/// when no dimension is shared. The normalized
/// metric requires `norm` (Error(parameter) otherwise); unusable dimensions
/// count as missing.
std::optional<double> masked_distance(const MaskedVector& a,
                                      const MaskedVector& b, Metric metric,
                                      const Normalization* norm = nullptr);

struct NeighborSet {
  std::size_t query_step = 0;
  std::vector<std::size_t> neighbor_steps;
  std::vector<double> distances;
};

/// Comparable support rows ranked by (distance, step).
struct Ranking {
  std::vector<std::size_t> steps;
  std::vector<double> distances;
};

inline constexpr double kHighMissingThreshold = 0.8;

/// Standard masked-distance ranking of every comparable support row.
Ranking rank_support(const MaskedVector& query, const SupportSet& support,
                     Metric metric, const Normalization* norm = nullptr);

/// Ranking for queries with few valid dimensions: rows valid on all of the
/// query's valid dimensions score the raw, unscaled sum over them; other rows
/// fall back to the standard rescaled rule.
Ranking rank_support_sparse(const MaskedVector& query,
                            const SupportSet& support, Metric metric,
                            const Normalization* norm = nullptr);

double missing_fraction(const MaskedVector& v);

/// Exhaustive k-nearest search with deterministic tie-break on step index.
NeighborSet knn_query(const MaskedVector& query, std::size_t query_step,
                      const SupportSet& support, const FilterSpec& spec,
                      const Normalization* norm = nullptr);

NeighborSet knn_query_sparse(const MaskedVector& query,
                             std::size_t query_step,
                             const SupportSet& support, const FilterSpec& spec,
                             const Normalization* norm = nullptr);

/// Routes to knn_query_sparse when the query's missing fraction is at least
/// `threshold`, otherwise to knn_query.
NeighborSet find_neighbors(const MaskedVector& query, std::size_t query_step,
                           const SupportSet& support, const FilterSpec& spec,
                           const Normalization* norm,
                           double threshold = kHighMissingThreshold);

/// Replaces missing entries by 0 and marks every entry valid.
MaskedVector zero_fill(const MaskedVector& v);

}  // namespace etaknn
