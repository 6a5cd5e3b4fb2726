#include <cmath>

#include "doctest.h"
#include "etaknn/error.hpp"
#include "etaknn/synthcity.hpp"

using namespace etaknn;

namespace {

bool panels_identical(const Panel& a, const Panel& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c)
      if (a.state(r, c) != b.state(r, c) || a.value(r, c) != b.value(r, c)) return false;
  return true;
}

}  // namespace

TEST_CASE("fourteen days of quarter hours") {
  SynthSpec spec;
  auto city = generate(spec);
  CHECK(city.dataset.time.total_steps() == 1344);
  CHECK(city.dataset.flows.data.rows() == 1344);
  CHECK(city.dataset.etas.data.cols() == spec.n_supersegments);
  CHECK(city.dataset.graph.edges().size() == spec.n_edges);
  CHECK(city.dataset.flows.counter_ids.size() == 30);
}

TEST_CASE("no missing rate means a fully valid flow panel") {
  SynthSpec spec;
  spec.n_days = 3;
  const auto& fp = generate(spec).dataset.flows;
  CHECK(fp.data.count_valid() == fp.data.rows() * fp.data.cols());
}

TEST_CASE("missing rate is honoured approximately") {
  SynthSpec spec;
  spec.missing_rate = 0.5;
  const auto& fp = generate(spec).dataset.flows;
  const double share = 1.0 - static_cast<double>(fp.data.count_valid()) /
                                 static_cast<double>(fp.data.rows() * fp.data.cols());
  CHECK(share == doctest::Approx(0.5).epsilon(0.03));
}

TEST_CASE("same seed gives bit-identical cities, another seed does not") {
  SynthSpec spec;
  spec.n_days = 4;
  spec.missing_rate = 0.2;
  auto a = generate(spec);
  auto b = generate(spec);
  CHECK(panels_identical(a.dataset.flows.data, b.dataset.flows.data));
  CHECK(panels_identical(a.dataset.etas.data, b.dataset.etas.data));
  CHECK(a.latent.congestion == b.latent.congestion);
  spec.seed = 2;
  auto c = generate(spec);
  CHECK_FALSE(panels_identical(a.dataset.etas.data, c.dataset.etas.data));
}

TEST_CASE("zero congestion gives the shortest travel time") {
  SynthSpec spec;
  spec.n_days = 2;
  auto city = generate(spec);
  auto lat = city.latent;
  std::fill(lat.congestion.begin(), lat.congestion.end(), 0.0);
  for (std::size_t s = 0; s < lat.ss_shortest_s.size(); ++s) {
    CHECK(oracle_eta(lat, 50, s) == city.dataset.graph.shortest_time_s(s));
  }
}

TEST_CASE("doubling congestion doubles the excess over free flow") {
  SynthSpec spec;
  spec.n_days = 2;
  auto city = generate(spec);
  auto doubled = city.latent;
  for (double& c : doubled.congestion) c *= 2.0;
  for (std::size_t t : {30u, 70u, 130u}) {
    for (std::size_t s = 0; s < doubled.ss_shortest_s.size(); ++s) {
      const double free = city.latent.ss_shortest_s[s];
      const double e1 = oracle_eta(city.latent, t, s) - free;
      const double e2 = oracle_eta(doubled, t, s) - free;
      CHECK(e2 == doctest::Approx(2.0 * e1).epsilon(1e-12));
    }
  }
}

TEST_CASE("days of the same regime repeat exactly without jitter") {
  SynthSpec spec;
  spec.day_jitter = 0.0;
  spec.noise_std = 0.0;
  spec.flow_noise_rel = 0.0;
  auto city = generate(spec);
  const auto& lat = city.latent;
  int a = -1, b = -1;
  for (int d = 0; d < spec.n_days && b < 0; ++d)
    for (int e = d + 1; e < spec.n_days; ++e)
      if (lat.day_regime[d] == lat.day_regime[e]) {
        a = d;
        b = e;
        break;
      }
  REQUIRE(b >= 0);
  const auto& time = city.dataset.time;
  for (int slot : {0, 33, 70}) {
    const auto ta = time.step_of(a, slot), tb = time.step_of(b, slot);
    for (std::size_t s = 0; s < lat.ss_shortest_s.size(); ++s)
      CHECK(city.dataset.etas.data.value(ta, s) == city.dataset.etas.data.value(tb, s));
    for (std::size_t c = 0; c < city.dataset.flows.data.cols(); ++c)
      CHECK(city.dataset.flows.data.value(ta, c) == city.dataset.flows.data.value(tb, c));
  }
}

TEST_CASE("generated travel times respect the bounds") {
  SynthSpec spec;
  spec.noise_std = 40.0;
  auto city = generate(spec);
  const auto& p = city.dataset.etas.data;
  for (std::size_t t = 0; t < p.rows(); ++t)
    for (std::size_t s = 0; s < p.cols(); ++s) {
      CHECK_UNARY(p.value(t, s) >= 1.0);
      CHECK_UNARY(p.value(t, s) <= kMaxEtaSeconds);
    }
}

TEST_CASE("infeasible specs are generation errors") {
  SynthSpec spec;
  spec.n_nodes = 4;
  spec.n_edges = 8;
  spec.n_supersegments = 500;
  try {
    generate(spec);
    FAIL("expected a generation error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::generation);
  }
  SynthSpec bad;
  bad.missing_rate = 1.5;
  CHECK_THROWS_AS(bad.validate(), Error);
}
