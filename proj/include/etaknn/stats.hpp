#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace etaknn {

/// Percentile with linear interpolation between closest ranks
/// (position q * (n - 1) in the sorted sample). `sorted` must be ascending
/// and non-empty; q in [0, 1].
double percentile_sorted(std::span<const double> sorted, double q);

/// Median of an unsorted sample; the midpoint of the two middle values for
/// even sizes. Reorders `values`.
double median_inplace(std::span<double> values);

double mean(std::span<const double> values);
/// Population standard deviation.
double stddev(std::span<const double> values);

struct SummaryStats {
  double mean = 0.0;
  double std = 0.0;
  double median = 0.0;
  double p25 = 0.0;
  double p75 = 0.0;
};

/// Sorts `values` in place and summarizes them. Requires a non-empty sample.
SummaryStats summarize(std::vector<double>& values);

/// Deterministic, platform-independent generator (splitmix64 seeded
/// xoshiro256**). Distributions are implemented here rather than taken from
/// <random> so streams are identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next();
  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  double normal();
  bool bernoulli(double p) { return uniform() < p; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t s_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Named sub-seed derivation so that every stage draws from its own stream.
std::uint64_t sub_seed(std::uint64_t seed, std::string_view stage);

}  // namespace etaknn
