#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "etaknn/core.hpp"
#include "etaknn/ingest.hpp"
#include "etaknn/matrix.hpp"
#include "etaknn/neighbors.hpp"
#include "etaknn/stats.hpp"

namespace etaknn {

/// Suffixes of the five label statistics, in column order.
inline constexpr std::array<const char*, 5> kStatSuffixes = {
    "mean", "std", "median", "p25", "p75"};

/// Summary of the valid ETAs of `supersegment` at `steps`; nullopt when none
/// is valid.
std::optional<SummaryStats> label_stats(const EtaPanel& etas,
                                        std::size_t supersegment,
                                        const std::vector<std::size_t>& steps);

/// One entry per neighbor set, in filter order.
std::vector<std::optional<SummaryStats>> similarity_features(
    const std::vector<NeighborSet>& nsets, const EtaPanel& etas,
    std::size_t supersegment);

struct StaticFeatures {
  SupersegmentId id = 0;
  std::size_t edge_count = 0;
  double length_m = 0.0;
  double shortest_s = 0.0;
  std::optional<SummaryStats> all_support;
};

StaticFeatures static_features(const RoadGraph& graph, const EtaPanel& etas,
                               const std::vector<std::size_t>& support_steps,
                               std::size_t supersegment);

struct NodeflowFeatures {
  std::size_t n_counters = 0;
  // Per input step, oldest first; nullopt when no counter reading is valid.
  std::array<std::optional<double>, 4> sum, mean, max;
  std::optional<double> valid_fraction;
};

/// Flow columns of the counters sitting on the supersegment's nodes.
std::vector<std::size_t> supersegment_counters(const RoadGraph& graph,
                                               const FlowPanel& flows,
                                               std::size_t supersegment);

/// `window` is a flattened four-step window over all flow columns.
NodeflowFeatures nodeflow_features(const MaskedVector& window,
                                   std::size_t n_flow_columns,
                                   const std::vector<std::size_t>& counters);

struct CombinedFeatures {
  std::optional<double> ratio;              // median(num) / median(den)
  std::optional<double> excess_over_free;   // median(anchor) - shortest
  std::optional<double> lower_band;         // median(anchor) - std(anchor)
  std::optional<double> upper_band;         // median(anchor) + 2 std(anchor)
};

inline constexpr double kRatioDenominatorFloor = 1e-9;

CombinedFeatures combined_features(const std::optional<SummaryStats>& numerator,
                                   const std::optional<SummaryStats>& denominator,
                                   const std::optional<SummaryStats>& anchor,
                                   double shortest_s);

/// Column layout implied by the filter bank. Throws Error(config) when the
/// combined features name a filter label that is not configured.
std::vector<ColumnInfo> feature_columns(const PipelineConfig& cfg);

/// Rows for the query steps of one plan, ordered by step then supersegment.
/// Neighbors are drawn from the plan's support steps only, and labels are
/// attached wherever the ETA panel holds a value.
FeatureMatrix build_fold_rows(const PipelineConfig& cfg, const RoadGraph& graph,
                              const FlowPanel& flows, const EtaPanel& etas,
                              const SplitPlan& plan);

/// Training matrix over days [0, n_days): every day-wise fold in turn, or
/// the single alternating-week plan for the equal split.
FeatureMatrix build_training_matrix(const PipelineConfig& cfg,
                                    const RoadGraph& graph,
                                    const FlowPanel& flows,
                                    const EtaPanel& etas, const TimeIndex& time,
                                    int n_days);

}  // namespace etaknn
