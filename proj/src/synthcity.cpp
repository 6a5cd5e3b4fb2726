#include "etaknn/synthcity.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "etaknn/error.hpp"
#include "etaknn/stats.hpp"

namespace etaknn {

void SynthSpec::validate() const {
  auto bad = [](const std::string& what) { fail(ErrorCode::generation, what); };
  if (n_nodes < 4) bad("n_nodes must be at least 4");
  if (n_edges < 1) bad("n_edges must be positive");
  if (n_supersegments < 1) bad("n_supersegments must be positive");
  if (n_days < 1) bad("n_days must be positive");
  if (steps_per_day < 8) bad("steps_per_day must be at least 8");
  if (!(counter_fraction > 0.0) || counter_fraction > 1.0) {
    bad("counter_fraction must be in (0, 1]");
  }
  if (!(missing_rate >= 0.0) || !(missing_rate < 1.0)) {
    bad("missing_rate must be in [0, 1)");
  }
  if (!(eta_missing_rate >= 0.0) || !(eta_missing_rate < 1.0)) {
    bad("eta_missing_rate must be in [0, 1)");
  }
  if (congestion_regimes < 1) bad("congestion_regimes must be positive");
  if (n_regions < 1) bad("n_regions must be positive");
  if (!(noise_std >= 0.0)) bad("noise_std must be non-negative");
  if (!(day_jitter >= 0.0)) bad("day_jitter must be non-negative");
  if (!(flow_noise_rel >= 0.0)) bad("flow_noise_rel must be non-negative");
}

namespace {

constexpr double kSpacingM = 350.0;
constexpr double kMetersPerDegLat = 111320.0;
constexpr double kLat0 = 51.5;
constexpr double kLon0 = -0.12;

double bump(double x, double centre, double width) {
  const double z = (x - centre) / width;
  return std::exp(-0.5 * z * z);
}

double speed_of(HighwayClass c) {
  switch (c) {
    case HighwayClass::primary: return 60.0;
    case HighwayClass::secondary: return 50.0;
    case HighwayClass::tertiary: return 40.0;
    default: return 30.0;
  }
}

HighwayClass class_of_line(std::size_t line, Rng& rng) {
  if (line % 4 == 0) return HighwayClass::primary;
  if (line % 2 == 0) return HighwayClass::secondary;
  return rng.bernoulli(0.5) ? HighwayClass::tertiary : HighwayClass::residential;
}

struct Regime {
  double morning, evening, midday, shift;
};

struct RegionShape {
  double morning, evening, shift;
};

}  // namespace

SynthCity generate(const SynthSpec& spec) {
  spec.validate();
  SynthCity city;
  LatentState& lat = city.latent;

  // ---- graph ----
  Rng grng(sub_seed(spec.seed, "synth/graph"));
  const std::size_t n = spec.n_nodes;
  const std::size_t cols =
      static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
  const double dlat = kSpacingM / kMetersPerDegLat;
  const double dlon =
      kSpacingM / (kMetersPerDegLat * std::cos(kLat0 * std::numbers::pi / 180));

  std::vector<Node> nodes(n);
  std::vector<int> node_region(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = i / cols, c = i % cols;
    nodes[i].id = static_cast<NodeId>(i + 1);
    nodes[i].lat = kLat0 + (static_cast<double>(r) + grng.uniform(-0.2, 0.2)) * dlat;
    nodes[i].lon = kLon0 + (static_cast<double>(c) + grng.uniform(-0.2, 0.2)) * dlon;
    node_region[i] = static_cast<int>(c * static_cast<std::size_t>(spec.n_regions) / cols);
  }

  // Undirected grid links; each contributes both directions.
  struct Link {
    std::size_t a, b;
    HighwayClass cls;
  };
  std::vector<Link> links;
  std::vector<HighwayClass> row_class, col_class;
  for (std::size_t r = 0; r <= n / cols; ++r) row_class.push_back(class_of_line(r, grng));
  for (std::size_t c = 0; c < cols; ++c) col_class.push_back(class_of_line(c, grng));
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = i / cols, c = i % cols;
    if (c + 1 < cols && i + 1 < n) links.push_back({i, i + 1, row_class[r]});
    if (i + cols < n) links.push_back({i, i + cols, col_class[c]});
  }
  if (spec.n_edges > 2 * links.size()) {
    fail(ErrorCode::generation,
         "n_edges = " + std::to_string(spec.n_edges) + " exceeds the " +
             std::to_string(2 * links.size()) + " grid edges of " +
             std::to_string(n) + " nodes");
  }
  grng.shuffle(links);

  auto length_between = [&](std::size_t a, std::size_t b) {
    const double dy = (nodes[a].lat - nodes[b].lat) * kMetersPerDegLat;
    const double dx = (nodes[a].lon - nodes[b].lon) * kMetersPerDegLat *
                      std::cos(kLat0 * std::numbers::pi / 180);
    return std::hypot(dx, dy);
  };

  std::vector<Edge> edges;
  std::vector<int> edge_region;
  for (const Link& l : links) {
    for (int dir = 0; dir < 2 && edges.size() < spec.n_edges; ++dir) {
      const std::size_t from = dir == 0 ? l.a : l.b;
      const std::size_t to = dir == 0 ? l.b : l.a;
      Edge e;
      e.id = static_cast<EdgeId>(edges.size() + 1);
      e.from = nodes[from].id;
      e.to = nodes[to].id;
      e.length_m = length_between(from, to);
      e.highway = l.cls;
      e.speed_kph = speed_of(l.cls);
      edges.push_back(e);
      edge_region.push_back(node_region[from]);
    }
    if (edges.size() >= spec.n_edges) break;
  }

  // Supersegments: simple random walks of 3 to 8 edges.
  std::vector<std::vector<std::size_t>> out_edges(n);
  for (std::size_t e = 0; e < edges.size(); ++e) {
    out_edges[static_cast<std::size_t>(edges[e].from - 1)].push_back(e);
  }
  std::set<std::vector<std::size_t>> seen_paths;
  std::vector<std::vector<std::size_t>> paths;
  const std::size_t max_attempts = 1000 * spec.n_supersegments;
  for (std::size_t attempt = 0;
       attempt < max_attempts && paths.size() < spec.n_supersegments; ++attempt) {
    const std::size_t target_len = 3 + static_cast<std::size_t>(grng.below(6));
    std::vector<std::size_t> path{static_cast<std::size_t>(grng.below(edges.size()))};
    std::set<NodeId> visited{edges[path[0]].from, edges[path[0]].to};
    while (path.size() < target_len) {
      const auto head = static_cast<std::size_t>(edges[path.back()].to - 1);
      std::vector<std::size_t> options;
      for (std::size_t e : out_edges[head]) {
        if (!visited.count(edges[e].to)) options.push_back(e);
      }
      if (options.empty()) break;
      const std::size_t next = options[grng.below(options.size())];
      visited.insert(edges[next].to);
      path.push_back(next);
    }
    if (path.size() < 3) continue;
    if (seen_paths.insert(path).second) paths.push_back(path);
  }
  if (paths.size() < spec.n_supersegments) {
    fail(ErrorCode::generation,
         "could only construct " + std::to_string(paths.size()) + " of " +
             std::to_string(spec.n_supersegments) +
             " distinct supersegments; add edges or reduce n_supersegments");
  }

  // Counters.
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  grng.shuffle(order);
  const std::size_t n_counters = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::lround(spec.counter_fraction * static_cast<double>(n))));
  for (std::size_t i = 0; i < n_counters; ++i) nodes[order[i]].has_counter = true;

  std::vector<Supersegment> sss;
  for (std::size_t s = 0; s < paths.size(); ++s) {
    Supersegment ss;
    ss.id = static_cast<SupersegmentId>(s + 1);
    for (std::size_t e : paths[s]) ss.edges.push_back(edges[e].id);
    sss.push_back(std::move(ss));
  }

  Dataset& ds = city.dataset;
  ds.graph = RoadGraph(nodes, edges, sss);
  ds.time = TimeIndex(spec.start_date, spec.n_days, spec.steps_per_day);
  const std::size_t total = ds.time.total_steps();
  const auto spd = static_cast<std::size_t>(spec.steps_per_day);

  // ---- latent congestion ----
  Rng lrng(sub_seed(spec.seed, "synth/latent"));
  std::vector<Regime> regimes(static_cast<std::size_t>(spec.congestion_regimes));
  for (auto& g : regimes) {
    g.morning = lrng.uniform(0.2, 1.5);
    g.evening = lrng.uniform(0.2, 1.5);
    g.midday = lrng.uniform(0.0, 0.5);
    g.shift = lrng.uniform(-4.0, 4.0);
  }
  std::vector<RegionShape> shapes(static_cast<std::size_t>(spec.n_regions));
  for (auto& r : shapes) {
    r.morning = lrng.uniform(0.7, 1.3);
    r.evening = lrng.uniform(0.7, 1.3);
    r.shift = lrng.uniform(-3.0, 3.0);
  }

  lat.time = ds.time;
  lat.n_regions = spec.n_regions;
  lat.congestion.assign(total * static_cast<std::size_t>(spec.n_regions), 0.0);
  const double slot_scale = 96.0 / static_cast<double>(spec.steps_per_day);
  for (int d = 0; d < spec.n_days; ++d) {
    const int g = static_cast<int>(lrng.below(regimes.size()));
    const double scale = std::max(0.0, 1.0 + spec.day_jitter * lrng.normal());
    lat.day_regime.push_back(g);
    lat.day_scale.push_back(scale);
    std::vector<double> region_scale(shapes.size());
    for (auto& s : region_scale) {
      s = std::max(0.0, 1.0 + spec.day_jitter * lrng.normal());
    }
    const Regime& rg = regimes[static_cast<std::size_t>(g)];
    for (std::size_t slot = 0; slot < spd; ++slot) {
      const double x = static_cast<double>(slot) * slot_scale;
      const std::size_t step = static_cast<std::size_t>(d) * spd + slot;
      for (std::size_t r = 0; r < shapes.size(); ++r) {
        const RegionShape& sh = shapes[r];
        const double shift = rg.shift + sh.shift;
        const double c = rg.morning * sh.morning * bump(x, 32.0 + shift, 5.0) +
                         rg.evening * sh.evening * bump(x, 70.0 + shift, 7.0) +
                         rg.midday * bump(x, 50.0, 12.0);
        lat.congestion[step * shapes.size() + r] = scale * region_scale[r] * c;
      }
    }
  }
  lat.demand.resize(spd);
  for (std::size_t slot = 0; slot < spd; ++slot) {
    const double x = static_cast<double>(slot) * slot_scale;
    lat.demand[slot] = 0.15 + 0.5 * bump(x, 32.0, 8.0) +
                       0.6 * bump(x, 70.0, 10.0) + 0.3 * bump(x, 52.0, 20.0);
  }

  // ---- flows ----
  Rng frng(sub_seed(spec.seed, "synth/flows"));
  Rng mrng(sub_seed(spec.seed, "synth/missing"));
  for (std::size_t i = 0; i < n; ++i) {
    if (!nodes[i].has_counter) continue;
    ds.flows.counter_ids.push_back(nodes[i].id);
    lat.counter_region.push_back(node_region[i]);
    lat.counter_base.push_back(frng.uniform(80.0, 400.0));
  }
  const std::size_t nc = ds.flows.counter_ids.size();
  ds.flows.data = Panel(total, nc);
  for (std::size_t t = 0; t < total; ++t) {
    for (std::size_t c = 0; c < nc; ++c) {
      const double clean = oracle_flow(lat, t, c);
      const double v = std::max(0.0, clean * (1.0 + spec.flow_noise_rel * frng.normal()));
      if (mrng.bernoulli(spec.missing_rate)) continue;
      ds.flows.data.set(t, c, v, CellState::observed);
    }
  }

  // ---- travel times ----
  Rng erng(sub_seed(spec.seed, "synth/etas"));
  for (std::size_t s = 0; s < paths.size(); ++s) {
    ds.etas.supersegment_ids.push_back(sss[s].id);
    lat.ss_shortest_s.push_back(ds.graph.shortest_time_s(s));
    lat.ss_beta.push_back(erng.uniform(0.8, 2.0));
    std::vector<int> regions;
    for (std::size_t e : paths[s]) regions.push_back(edge_region[e]);
    lat.ss_edge_regions.push_back(std::move(regions));
  }
  ds.etas.data = Panel(total, paths.size());
  for (std::size_t t = 0; t < total; ++t) {
    for (std::size_t s = 0; s < paths.size(); ++s) {
      const double v = std::clamp(
          oracle_eta(lat, t, s) + spec.noise_std * erng.normal(), 1.0,
          kMaxEtaSeconds);
      if (mrng.bernoulli(spec.eta_missing_rate)) continue;
      ds.etas.data.set(t, s, v, CellState::observed);
    }
  }
  return city;
}

double oracle_eta(const LatentState& latent, std::size_t step,
                  std::size_t supersegment) {
  const auto& regions = latent.ss_edge_regions[supersegment];
  double c = 0.0;
  for (int r : regions) c += latent.level(step, r);
  c /= static_cast<double>(regions.size());
  return latent.ss_shortest_s[supersegment] *
         (1.0 + latent.ss_beta[supersegment] * c);
}

double oracle_flow(const LatentState& latent, std::size_t step,
                   std::size_t counter) {
  const auto slot = static_cast<std::size_t>(latent.time.slot_of(step));
  return latent.counter_base[counter] * latent.demand[slot] *
         (1.0 + 0.5 * latent.level(step, latent.counter_region[counter]));
}

FlowPanel oracle_flows(const LatentState& latent,
                       const std::vector<NodeId>& counter_ids) {
  FlowPanel fp;
  fp.counter_ids = counter_ids;
  fp.data = Panel(latent.time.total_steps(), counter_ids.size());
  for (std::size_t t = 0; t < fp.data.rows(); ++t) {
    for (std::size_t c = 0; c < fp.data.cols(); ++c) {
      fp.data.set(t, c, oracle_flow(latent, t, c), CellState::observed);
    }
  }
  return fp;
}

}  // namespace etaknn
