#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "etaknn/core.hpp"
#include "etaknn/gbdt.hpp"
#include "etaknn/impute.hpp"
#include "etaknn/neighbors.hpp"

namespace etaknn {

/// Labels of the filters the combined features are derived from.
struct CombinedSpec {
  std::string ratio_numerator = "30-NN";
  std::string ratio_denominator = "100-NN";
  std::string anchor = "50-NN";
};

struct PipelinePaths {
  std::string data_dir;
  std::string output_dir;
};

struct PipelineConfig {
  std::vector<FilterSpec> knn_filters;
  SplitStrategy split = SplitStrategy::daywise;
  GpConfig gp;
  GbdtConfig gbdt;
  CombinedSpec combined;
  std::uint64_t seed = 1;
  double test_fraction = 0.2;  // trailing share of days held out
  double high_missing_threshold = kHighMissingThreshold;
  PipelinePaths paths;

  /// Manhattan filters with k in {5, 10, 30, 50, 100}.
  static PipelineConfig defaults();

  /// Throws Error(config): no filters, k < 1, duplicate labels, bad
  /// fractions, or invalid GP/GBDT settings.
  void validate() const;
};

/// Filter bank used when the label-statistic metrics are varied: the primary
/// bank (k in {5, 10, 30, 50, 100}) on `flow_metric`, plus a {30, 50} bank
/// for every other metric in `extra_metrics`, labelled "<k>-NN/<metric>".
std::vector<FilterSpec> filter_bank(Metric flow_metric,
                                    const std::vector<Metric>& extra_metrics);

PipelineConfig load_config(const std::filesystem::path& path);
PipelineConfig parse_config(const std::string& json_text);
std::string dump_config(const PipelineConfig& cfg);

// Dataset directory layout.
inline constexpr const char* kNodesFile = "nodes.csv";
inline constexpr const char* kEdgesFile = "edges.csv";
inline constexpr const char* kSupersegmentsFile = "supersegments.csv";
inline constexpr const char* kTimeFile = "time.json";
inline constexpr const char* kFlowsFile = "flows.csv";
inline constexpr const char* kEtasFile = "etas.csv";

/// Reads nodes.csv, edges.csv and supersegments.csv from `dir`. Malformed
/// rows raise Error(parse) with file:line; dangling references and empty or
/// disconnected supersegments raise Error(integrity).
RoadGraph load_graph(const std::filesystem::path& dir);
void save_graph(const RoadGraph& graph, const std::filesystem::path& dir);

TimeIndex load_time_index(const std::filesystem::path& path);
void save_time_index(const TimeIndex& time, const std::filesystem::path& path);

/// Long-form `step,id,value`. Absent rows and empty value fields are missing.
FlowPanel load_flow_panel(const std::filesystem::path& path,
                          const TimeIndex& time, const RoadGraph& graph);
void save_flow_panel(const FlowPanel& flows, const std::filesystem::path& path);

/// Accepts `step,id,value` or the prediction header
/// `step,supersegment_id,eta_s`. Values must lie in (0, 3600].
EtaPanel load_eta_panel(const std::filesystem::path& path,
                        const TimeIndex& time, const RoadGraph& graph);
void save_eta_panel(const EtaPanel& etas, const std::filesystem::path& path);

/// Writes valid cells as `step,supersegment_id,eta_s`. Refuses non-finite
/// values with Error(parameter).
void save_predictions(const EtaPanel& preds, const std::filesystem::path& path);

struct LongCell {
  std::size_t step = 0;
  std::int64_t id = 0;
  double value = 0.0;
};

/// Graph-free reader for any three-column long-form panel file; empty value
/// fields are skipped.
std::vector<LongCell> load_long_cells(const std::filesystem::path& path);
void save_prediction_cells(const std::vector<LongCell>& cells,
                           const std::filesystem::path& path);

struct Dataset {
  RoadGraph graph;
  TimeIndex time;
  FlowPanel flows;
  EtaPanel etas;
};

/// Loads a dataset directory; `flows_override` replaces flows.csv when set.
Dataset load_dataset(const std::filesystem::path& dir,
                     const std::filesystem::path& flows_override = {});
void save_dataset(const Dataset& ds, const std::filesystem::path& dir);

/// Feature matrix CSV (`step,supersegment_id,<columns...>,label`, empty
/// fields for missing) plus a JSON sidecar at `<path>.json` describing the
/// columns.
void save_matrix(const FeatureMatrix& m, const std::filesystem::path& path);
FeatureMatrix load_matrix(const std::filesystem::path& path);

std::string format_double(double v);

}  // namespace etaknn
