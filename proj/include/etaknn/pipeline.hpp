#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "etaknn/features.hpp"
#include "etaknn/gbdt.hpp"
#include "etaknn/impute.hpp"
#include "etaknn/ingest.hpp"

namespace etaknn {

/// Mean absolute error over paired values. Error(metric) when empty.
double mae(std::span<const double> pred, std::span<const double> truth);

/// MAE over cells valid in both panels. Error(metric) when shapes differ or
/// no cell qualifies.
double mae(const EtaPanel& pred, const EtaPanel& truth);

/// MAE over truth cells that have a prediction with the same (step, id).
double mae(const std::vector<LongCell>& pred, const std::vector<LongCell>& truth);

/// Number of trailing days held out for testing: round(fraction * n_days),
/// at least one, leaving at least one training day.
int held_out_days(const TimeIndex& time, double test_fraction);

/// Copy of the panel with every step from `first_step` on set missing.
EtaPanel mask_from(const EtaPanel& etas, std::size_t first_step);

/// Historical baseline: per supersegment and slot of day, the median of the
/// ETAs observed on days [0, n_train_days). Filled for steps of later days.
EtaPanel slot_median_baseline(const EtaPanel& etas, const TimeIndex& time,
                              int n_train_days);

/// Predictions for the held-out days as an ETA panel (other steps missing).
EtaPanel predictions_panel(const FeatureMatrix& m, const std::vector<double>& preds,
                           const RoadGraph& graph, std::size_t total_steps);

/// Gain share per feature group, indexed by FeatureGroup.
std::array<double, 4> group_importance(const GbdtModel& model);

struct StageTimes {
  double impute_s = 0.0;
  double features_s = 0.0;
  double train_s = 0.0;
  double predict_s = 0.0;
};

struct PipelineResult {
  int train_days = 0;
  int test_days = 0;
  std::size_t train_rows = 0;
  std::size_t test_rows = 0;
  double mae = 0.0;
  double baseline_mae = 0.0;
  GbdtModel model;
  EtaPanel predictions;
  std::array<double, 4> group_share{};
  StageTimes times;
};

/// Imputed flows for the training prefix; held-out days stay raw.
FlowPanel impute_training_flows(const PipelineConfig& cfg, const Dataset& ds,
                                ImputeReport* report = nullptr);

/// GBDT settings with the seed derived from the root seed.
GbdtConfig stage_gbdt_config(const PipelineConfig& cfg);

/// Feature matrix for the held-out days: support is every training day,
/// labels are attached from the true ETAs for evaluation only.
FeatureMatrix build_test_matrix(const PipelineConfig& cfg, const Dataset& ds,
                                const FlowPanel& flows, int train_days);

/// Split, impute, build features, train, predict and score the held-out
/// days against the slot-of-day median baseline.
PipelineResult run_pipeline(const PipelineConfig& cfg, const Dataset& ds);

/// Same, reusing flows already imputed by impute_training_flows.
PipelineResult run_pipeline_on(const PipelineConfig& cfg, const Dataset& ds,
                               const FlowPanel& imputed);

struct AblationRow {
  SplitStrategy split = SplitStrategy::daywise;
  Metric flow_metric = Metric::manhattan;
  std::vector<Metric> y_metrics;
  std::size_t n_trees = 1500;
  std::size_t n_leaves = 42;
};

struct AblationSpec {
  std::vector<AblationRow> rows;

  /// The eight configurations of the reference comparison table.
  static AblationSpec reference_table();
};

struct AblationResult {
  AblationRow row;
  double mae = 0.0;
  double seconds = 0.0;
};

/// Pipeline config for one ablation row on top of `base`.
PipelineConfig ablation_config(const PipelineConfig& base, const AblationRow& row);

/// Imputes once, then runs every row on the shared dataset and seed.
std::vector<AblationResult> run_ablation(const AblationSpec& spec,
                                         const PipelineConfig& base,
                                         const Dataset& ds);

/// `splitting,flow_metric,y_metrics,n_trees,n_leaves,mae,seconds`
std::string ablation_csv(const std::vector<AblationResult>& results);

/// Parses rows given as `split,flow_metric,y1+y2,n_trees,n_leaves`.
AblationSpec parse_ablation_spec(const std::string& text);

}  // namespace etaknn
