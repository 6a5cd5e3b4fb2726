#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "etaknn/core.hpp"
#include "etaknn/ingest.hpp"

namespace etaknn {

/// Parameters of a synthetic city. Nodes sit on a jittered grid split into
/// vertical bands (regions); each region carries a daily-periodic congestion
/// level that drives both counter flows and supersegment travel times.
struct SynthSpec {
  std::size_t n_nodes = 100;
  std::size_t n_edges = 240;
  std::size_t n_supersegments = 20;
  int n_days = 14;
  int steps_per_day = 96;
  double counter_fraction = 0.3;
  double missing_rate = 0.0;
  int congestion_regimes = 3;
  double noise_std = 5.0;  // seconds
  std::uint64_t seed = 1;
  int n_regions = 4;
  double day_jitter = 0.1;       // relative day-to-day amplitude wobble
  double flow_noise_rel = 0.05;  // relative counter noise
  double eta_missing_rate = 0.0;
  Date start_date{2024, 1, 1};

  /// Throws Error(generation) on non-positive counts or rates out of range.
  void validate() const;
};

/// Ground truth retained by the generator.
struct LatentState {
  TimeIndex time;
  int n_regions = 0;
  std::vector<double> congestion;  // total_steps x n_regions, >= 0
  std::vector<int> day_regime;
  std::vector<double> day_scale;
  std::vector<double> demand;         // per slot of day
  std::vector<int> counter_region;    // per flow column
  std::vector<double> counter_base;   // per flow column
  std::vector<double> ss_shortest_s;  // per supersegment column
  std::vector<double> ss_beta;
  std::vector<std::vector<int>> ss_edge_regions;

  double level(std::size_t step, int region) const {
    return congestion[step * static_cast<std::size_t>(n_regions) +
                      static_cast<std::size_t>(region)];
  }
};

struct SynthCity {
  Dataset dataset;
  LatentState latent;
};

SynthCity generate(const SynthSpec& spec);

/// Noise-free travel time: shortest * (1 + beta * mean edge congestion).
double oracle_eta(const LatentState& latent, std::size_t step,
                  std::size_t supersegment);

/// Noise-free counter reading: base * demand(slot) * (1 + 0.5 c_region).
double oracle_flow(const LatentState& latent, std::size_t step,
                   std::size_t counter);

/// Fully observed noise-free flow panel with the same columns as the
/// generated one.
FlowPanel oracle_flows(const LatentState& latent,
                       const std::vector<NodeId>& counter_ids);

}  // namespace etaknn
