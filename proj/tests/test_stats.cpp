#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "etaknn/stats.hpp"

using namespace etaknn;

namespace {

// Closest-rank interpolation written directly from the definition.
double reference_percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

TEST_CASE("percentile examples") {
  std::vector<double> v{100, 200, 300};
  auto s = summarize(v);
  CHECK(s.median == 200.0);
  CHECK(s.p25 == 150.0);
  CHECK(s.p75 == 250.0);
  CHECK(s.mean == 200.0);

  std::vector<double> one{42.0};
  s = summarize(one);
  CHECK(s.mean == 42.0);
  CHECK(s.median == 42.0);
  CHECK(s.std == 0.0);
}

TEST_CASE("population standard deviation") {
  std::vector<double> v{2, 4};
  CHECK(stddev(v) == 1.0);
  CHECK(mean(v) == 3.0);
}

TEST_CASE("median of even and odd samples") {
  std::vector<double> odd{5, 1, 3};
  CHECK(median_inplace(odd) == 3.0);
  std::vector<double> even{4, 1, 3, 2};
  CHECK(median_inplace(even) == 2.5);
}

TEST_CASE("percentiles agree with a sort-based reference") {
  Rng rng(7);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> v(1 + rng.below(40));
    for (double& x : v) x = std::round(rng.uniform(0, 20));  // many ties
    std::vector<double> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    for (double q : {0.0, 0.25, 0.5, 0.75, 1.0}) {
      CHECK(std::abs(percentile_sorted(sorted, q) - reference_percentile(v, q)) <= 1e-12);
    }
    std::vector<double> copy = v;
    CHECK(std::abs(median_inplace(copy) - reference_percentile(v, 0.5)) <= 1e-12);
  }
}

TEST_CASE("generator streams are reproducible and seed-separated") {
  Rng a(123), b(123), c(124);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next();
    CHECK(x == b.next());
    differs = differs || x != c.next();
  }
  CHECK(differs);
  CHECK(sub_seed(1, "gbdt") != sub_seed(1, "synth/graph"));
  CHECK(sub_seed(1, "gbdt") == sub_seed(1, "gbdt"));
}

TEST_CASE("uniform and normal moments") {
  Rng rng(99);
  double su = 0, sn = 0, sn2 = 0;
  int out_of_range = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    out_of_range += (u < 0.0 || u >= 1.0);
    su += u;
    const double z = rng.normal();
    sn += z;
    sn2 += z * z;
  }
  CHECK(out_of_range == 0);
  CHECK(su / n == doctest::Approx(0.5).epsilon(0.01));
  CHECK(std::abs(sn / n) < 0.01);
  CHECK(sn2 / n == doctest::Approx(1.0).epsilon(0.02));
}
