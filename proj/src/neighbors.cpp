#include "etaknn/neighbors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "etaknn/error.hpp"
#include "etaknn/log.hpp"

namespace etaknn {

std::string_view to_string(Metric m) noexcept {
  switch (m) {
    case Metric::manhattan: return "manhattan";
    case Metric::euclidean: return "euclidean";
    case Metric::normalized_euclidean: return "normalized_euclidean";
  }
  return "manhattan";
}

Metric parse_metric(std::string_view token) {
  if (token == "manhattan") return Metric::manhattan;
  if (token == "euclidean") return Metric::euclidean;
  if (token == "normalized_euclidean") return Metric::normalized_euclidean;
  fail(ErrorCode::config, "unknown metric '" + std::string(token) + "'");
}

std::string_view to_string(SplitStrategy s) noexcept {
  switch (s) {
    case SplitStrategy::equal: return "equal";
    case SplitStrategy::daywise: return "day-wise";
    case SplitStrategy::holdout: return "holdout";
  }
  return "equal";
}

SplitStrategy parse_split(std::string_view token) {
  if (token == "equal") return SplitStrategy::equal;
  if (token == "day-wise" || token == "daywise") return SplitStrategy::daywise;
  fail(ErrorCode::config, "unknown split strategy '" + std::string(token) +
                              "', expected equal or day-wise");
}

std::vector<std::size_t> SplitPlan::steps_with(StepRole role) const {
  std::vector<std::size_t> out;
  for (std::size_t t = 0; t < roles.size(); ++t) {
    if (roles[t] == role) out.push_back(t);
  }
  return out;
}

namespace {

int resolve_days(const TimeIndex& time, int n_days) {
  if (n_days < 0) return time.n_days();
  if (n_days > time.n_days()) {
    fail(ErrorCode::split, "split uses " + std::to_string(n_days) +
                               " days but the time index has " +
                               std::to_string(time.n_days()));
  }
  return n_days;
}

void assign_day(SplitPlan& plan, const TimeIndex& time, int day,
                StepRole role) {
  const std::size_t first = time.step_of(day, 0);
  const auto per_day = static_cast<std::size_t>(time.steps_per_day());
  std::fill_n(plan.roles.begin() + static_cast<long>(first), per_day, role);
}

}  // namespace

SplitPlan split_equal(const TimeIndex& time, int n_days) {
  n_days = resolve_days(time, n_days);
  if (n_days < 14) {
    fail(ErrorCode::split, "equal split needs at least two weeks, got " +
                               std::to_string(n_days) + " days");
  }
  SplitPlan plan;
  plan.strategy = SplitStrategy::equal;
  plan.roles.assign(time.total_steps(), StepRole::excluded);
  for (int d = 0; d < n_days; ++d) {
    assign_day(plan, time, d,
               (d / 7) % 2 == 0 ? StepRole::query : StepRole::support);
  }
  return plan;
}

SplitPlan split_daywise(const TimeIndex& time, int day, int n_days) {
  n_days = resolve_days(time, n_days);
  if (day < 0 || day >= n_days) {
    fail(ErrorCode::range, "day " + std::to_string(day) +
                               " out of range for a " +
                               std::to_string(n_days) + "-day split");
  }
  SplitPlan plan;
  plan.strategy = SplitStrategy::daywise;
  plan.fold = day;
  plan.roles.assign(time.total_steps(), StepRole::excluded);
  for (int d = 0; d < n_days; ++d) {
    assign_day(plan, time, d, d == day ? StepRole::query : StepRole::support);
  }
  return plan;
}

SplitPlan split_holdout(const TimeIndex& time, int n_train_days) {
  if (n_train_days < 1 || n_train_days >= time.n_days()) {
    fail(ErrorCode::split,
         "holdout needs at least one training and one test day");
  }
  SplitPlan plan;
  plan.strategy = SplitStrategy::holdout;
  plan.roles.assign(time.total_steps(), StepRole::excluded);
  for (int d = 0; d < time.n_days(); ++d) {
    assign_day(plan, time, d,
               d < n_train_days ? StepRole::support : StepRole::query);
  }
  return plan;
}

void SupportSet::add(std::size_t step, const MaskedVector& v) {
  if (v.size() != dims_) {
    fail(ErrorCode::parameter, "support vector has " +
                                   std::to_string(v.size()) +
                                   " dimensions, expected " +
                                   std::to_string(dims_));
  }
  steps_.push_back(step);
  values_.insert(values_.end(), v.values.begin(), v.values.end());
  valid_.insert(valid_.end(), v.valid.begin(), v.valid.end());
}

SupportSet build_support(const FlowPanel& flows, const SplitPlan& plan) {
  SupportSet support(QueryWindow::kInputSteps * flows.data.cols());
  for (std::size_t t = 0; t < plan.roles.size(); ++t) {
    if (plan.roles[t] != StepRole::support) continue;
    support.add(t, flatten_window_padded(flows, t));
  }
  return support;
}

Normalization normalize_support(const SupportSet& support) {
  const std::size_t d = support.dims();
  Normalization n;
  n.mean.assign(d, 0.0);
  n.std.assign(d, 1.0);
  n.usable.assign(d, 0);
  std::vector<double> sum(d, 0.0);
  std::vector<std::size_t> count(d, 0);
  for (std::size_t i = 0; i < support.size(); ++i) {
    const double* v = support.values(i);
    const std::uint8_t* ok = support.valid(i);
    for (std::size_t j = 0; j < d; ++j) {
      if (ok[j]) {
        sum[j] += v[j];
        ++count[j];
      }
    }
  }
  for (std::size_t j = 0; j < d; ++j) {
    if (count[j] > 0) n.mean[j] = sum[j] / static_cast<double>(count[j]);
  }
  std::vector<double> ss(d, 0.0);
  for (std::size_t i = 0; i < support.size(); ++i) {
    const double* v = support.values(i);
    const std::uint8_t* ok = support.valid(i);
    for (std::size_t j = 0; j < d; ++j) {
      if (ok[j]) ss[j] += (v[j] - n.mean[j]) * (v[j] - n.mean[j]);
    }
  }
  for (std::size_t j = 0; j < d; ++j) {
    if (count[j] == 0) continue;
    n.usable[j] = 1;
    n.std[j] = std::max(kStdFloor,
                        std::sqrt(ss[j] / static_cast<double>(count[j])));
  }
  return n;
}

namespace {

struct Accumulated {
  double sum = 0.0;
  std::size_t shared = 0;  // valid in both
  std::size_t either = 0;  // valid in at least one
};

// Sums |a-b| or (a-b)^2 over dimensions valid in both inputs.
Accumulated accumulate(const double* a, const std::uint8_t* av,
                       const double* b, const std::uint8_t* bv, std::size_t d,
                       Metric metric, const Normalization* norm) {
  Accumulated acc;
  const bool squared = metric != Metric::manhattan;
  if (metric == Metric::normalized_euclidean) {
    for (std::size_t j = 0; j < d; ++j) {
      if (!norm->usable[j]) continue;
      const bool va = av[j] != 0, vb = bv[j] != 0;
      acc.either += (va || vb) ? 1 : 0;
      if (!(va && vb)) continue;
      const double diff = (a[j] - b[j]) / norm->std[j];
      acc.sum += diff * diff;
      ++acc.shared;
    }
    return acc;
  }
  for (std::size_t j = 0; j < d; ++j) {
    const bool va = av[j] != 0, vb = bv[j] != 0;
    acc.either += (va || vb) ? 1 : 0;
    if (!(va && vb)) continue;
    const double diff = a[j] - b[j];
    acc.sum += squared ? diff * diff : std::abs(diff);
    ++acc.shared;
  }
  return acc;
}

double finish(const Accumulated& acc, Metric metric) {
  const double scaled = acc.sum * static_cast<double>(acc.either) /
                        static_cast<double>(acc.shared);
  return metric == Metric::manhattan ? scaled : std::sqrt(scaled);
}

void require_norm(Metric metric, const Normalization* norm, std::size_t d) {
  if (metric != Metric::normalized_euclidean) return;
  if (norm == nullptr || norm->mean.size() != d) {
    fail(ErrorCode::parameter,
         "normalized_euclidean needs support normalization statistics");
  }
}

void sort_ranking(std::vector<std::pair<double, std::size_t>>& scored,
                  Ranking& out) {
  std::sort(scored.begin(), scored.end());
  out.steps.reserve(scored.size());
  out.distances.reserve(scored.size());
  for (const auto& [dist, step] : scored) {
    out.distances.push_back(dist);
    out.steps.push_back(step);
  }
}

NeighborSet take_prefix(const Ranking& r, std::size_t query_step,
                        std::size_t k) {
  NeighborSet n;
  n.query_step = query_step;
  const std::size_t m = std::min(k, r.steps.size());
  n.neighbor_steps.assign(r.steps.begin(), r.steps.begin() + static_cast<long>(m));
  n.distances.assign(r.distances.begin(),
                     r.distances.begin() + static_cast<long>(m));
  if (m == 0) {
    log_warning("no comparable support step for query step " +
                std::to_string(query_step));
  }
  return n;
}

}  // namespace

std::optional<double> masked_distance(const MaskedVector& a,
                                      const MaskedVector& b, Metric metric,
                                      const Normalization* norm) {
  if (a.size() != b.size() || a.valid.size() != a.size() ||
      b.valid.size() != b.size()) {
    fail(ErrorCode::parameter, "masked_distance needs equal-length inputs");
  }
  require_norm(metric, norm, a.size());
  const Accumulated acc =
      accumulate(a.values.data(), a.valid.data(), b.values.data(),
                 b.valid.data(), a.size(), metric, norm);
  if (acc.shared == 0) return std::nullopt;
  return finish(acc, metric);
}

double missing_fraction(const MaskedVector& v) {
  if (v.size() == 0) return 1.0;
  return 1.0 - static_cast<double>(v.count_valid()) /
                   static_cast<double>(v.size());
}

Ranking rank_support(const MaskedVector& query, const SupportSet& support,
                     Metric metric, const Normalization* norm) {
  if (query.size() != support.dims()) {
    fail(ErrorCode::parameter, "query and support dimensions differ");
  }
  require_norm(metric, norm, query.size());
  std::vector<std::pair<double, std::size_t>> scored;
  scored.reserve(support.size());
  for (std::size_t i = 0; i < support.size(); ++i) {
    const Accumulated acc =
        accumulate(query.values.data(), query.valid.data(), support.values(i),
                   support.valid(i), support.dims(), metric, norm);
    if (acc.shared == 0) continue;
    scored.emplace_back(finish(acc, metric), support.step(i));
  }
  Ranking out;
  sort_ranking(scored, out);
  return out;
}

Ranking rank_support_sparse(const MaskedVector& query,
                            const SupportSet& support, Metric metric,
                            const Normalization* norm) {
  if (query.size() != support.dims()) {
    fail(ErrorCode::parameter, "query and support dimensions differ");
  }
  require_norm(metric, norm, query.size());
  std::vector<std::size_t> dims;
  for (std::size_t j = 0; j < query.size(); ++j) {
    if (!query.valid[j]) continue;
    if (metric == Metric::normalized_euclidean && !norm->usable[j]) continue;
    dims.push_back(j);
  }
  std::vector<std::pair<double, std::size_t>> scored;
  scored.reserve(support.size());
  for (std::size_t i = 0; i < support.size(); ++i) {
    const double* b = support.values(i);
    const std::uint8_t* bv = support.valid(i);
    const bool covers =
        !dims.empty() &&
        std::all_of(dims.begin(), dims.end(), [&](std::size_t j) { return bv[j] != 0; });
    if (covers) {
      double sum = 0.0;
      for (std::size_t j : dims) {
        double diff = query.values[j] - b[j];
        if (metric == Metric::normalized_euclidean) diff /= norm->std[j];
        sum += metric == Metric::manhattan ? std::abs(diff) : diff * diff;
      }
      scored.emplace_back(metric == Metric::manhattan ? sum : std::sqrt(sum),
                          support.step(i));
      continue;
    }
    const Accumulated acc =
        accumulate(query.values.data(), query.valid.data(), b, bv,
                   support.dims(), metric, norm);
    if (acc.shared == 0) continue;
    scored.emplace_back(finish(acc, metric), support.step(i));
  }
  Ranking out;
  sort_ranking(scored, out);
  return out;
}

NeighborSet knn_query(const MaskedVector& query, std::size_t query_step,
                      const SupportSet& support, const FilterSpec& spec,
                      const Normalization* norm) {
  if (spec.k < 1) fail(ErrorCode::config, "filter k must be >= 1");
  return take_prefix(rank_support(query, support, spec.metric, norm),
                     query_step, spec.k);
}

NeighborSet knn_query_sparse(const MaskedVector& query,
                             std::size_t query_step,
                             const SupportSet& support, const FilterSpec& spec,
                             const Normalization* norm) {
  if (spec.k < 1) fail(ErrorCode::config, "filter k must be >= 1");
  return take_prefix(rank_support_sparse(query, support, spec.metric, norm),
                     query_step, spec.k);
}

NeighborSet find_neighbors(const MaskedVector& query, std::size_t query_step,
                           const SupportSet& support, const FilterSpec& spec,
                           const Normalization* norm, double threshold) {
  if (missing_fraction(query) >= threshold) {
    return knn_query_sparse(query, query_step, support, spec, norm);
  }
  return knn_query(query, query_step, support, spec, norm);
}

MaskedVector zero_fill(const MaskedVector& v) {
  MaskedVector out;
  out.values.resize(v.size());
  out.valid.assign(v.size(), 1);
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.values[i] = v.valid[i] ? v.values[i] : 0.0;
  }
  return out;
}

}  // namespace etaknn
