#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "etaknn/matrix.hpp"

namespace etaknn {

struct GbdtConfig {
  std::size_t n_trees = 2000;
  std::size_t n_leaves = 64;
  std::size_t max_depth = 7;
  double feature_subsample = 0.7;
  double learning_rate = 0.1;
  std::size_t min_samples_leaf = 20;
  std::size_t n_bins = 255;
  std::uint64_t seed = 0;
  // Histogram workers; results do not depend on this value.
  int threads = 1;

  /// Throws Error(config) on out-of-range values or n_leaves > 2^max_depth.
  void validate() const;
};

struct TreeNode {
  int feature = -1;  // index into GbdtModel::features; -1 for leaves
  double threshold = 0.0;            // numeric: value <= threshold goes left
  std::vector<double> left_categories;  // categorical: sorted, left if member
  bool default_left = true;          // route for missing values
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaf output, already scaled by the learning rate
  double gain = 0.0;

  bool is_leaf() const noexcept { return feature < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double evaluate(const double* row, const std::uint8_t* row_valid) const;
  std::size_t leaf_count() const;
  std::size_t depth() const;
};

struct ModelFeature {
  std::string name;
  FeatureGroup group = FeatureGroup::similarity;
  FeatureType type = FeatureType::numeric;
};

struct GbdtModel {
  double base_score = 0.0;
  std::vector<ModelFeature> features;
  std::vector<Tree> trees;
  std::vector<double> gains;      // total split gain per feature
  std::vector<double> train_mae;  // after each round
  GbdtConfig config;
};

/// L1-loss gradient boosting: base score is the label median, each round fits
/// a leaf-wise histogram tree to the residual signs and sets every leaf to
/// the median residual of its rows, shrunk by the learning rate. Rows with a
/// missing label are skipped.
GbdtModel train(const FeatureMatrix& matrix, const GbdtConfig& cfg);

/// base_score + sum of tree outputs, clamped to [1, 3600]. Throws
/// Error(schema) when a model feature is missing from the matrix.
std::vector<double> predict(const GbdtModel& model,
                            const FeatureMatrix& matrix);

/// Unclamped raw score for one row.
double predict_raw(const GbdtModel& model, const double* row,
                   const std::uint8_t* row_valid);

/// Features ranked by share of the total split gain; empty when the model
/// has no split.
std::vector<std::pair<std::string, double>> feature_importance(
    const GbdtModel& model);

void save_model(const GbdtModel& model, const std::string& path);
GbdtModel load_model(const std::string& path);

/// Writes `round,train_mae`.
void save_training_log(const GbdtModel& model, const std::string& path);

}  // namespace etaknn
