#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "etaknn/core.hpp"
#include "etaknn/features.hpp"
#include "etaknn/gbdt.hpp"
#include "etaknn/stats.hpp"
#include "etaknn/ingest.hpp"
#include "etaknn/neighbors.hpp"

namespace fixtures {

// Chain 1 -> 2 -> 3 with a single supersegment over both edges.
etaknn::RoadGraph chain_graph();

// Empty scratch directory under the system temp dir, unique per name.
std::filesystem::path scratch_dir(const std::string& name);

void write_file(const std::filesystem::path& path, const std::string& text);
std::string read_file(const std::filesystem::path& path);

// Flow panel with one column per counter, all cells missing.
etaknn::FlowPanel empty_flows(std::size_t steps, std::vector<etaknn::NodeId> ids);

struct RecallComparison {
  double candidate = 0.0;  // mean recall@k of the method under test
  double reference = 0.0;  // mean recall@k of the method it is compared with
};

// Recall@10 against neighbors computed on the noise-free, fully observed
// flows (euclidean), for queries on the last day of a 14-day city with
// `missing_rate` MCAR flow gaps; support is every earlier day.
// Candidate: manhattan masked distance. Reference: euclidean on zero-filled
// vectors.
RecallComparison masked_vs_zero_fill(std::uint64_t seed, double missing_rate,
                                     std::size_t n_queries);

// Same ground truth on a city with `support_missing` gaps; every query
// window is further thinned until `query_missing` of it is missing.
// Candidate: sparse ranking. Reference: standard masked ranking (manhattan).
RecallComparison sparse_vs_standard(std::uint64_t seed, double support_missing,
                                    double query_missing, std::size_t n_queries);

struct LeakageAudit {
  std::size_t folds = 0;
  std::size_t cells = 0;    // feature cells compared
  std::size_t changed = 0;  // cells whose value or validity moved
};

// Rebuilds every plan's rows after replacing all query-step ETAs with random
// values (and knocking some out), then compares features cell by cell.
LeakageAudit leakage_audit(const etaknn::PipelineConfig& cfg, const etaknn::Dataset& ds,
                           const std::vector<etaknn::SplitPlan>& plans, std::uint64_t seed);

// Rows with uniform(0, 10) features and a noisy label driven by column 1
// (column 0 when there is one column). With `with_categorical`, column 0 holds
// six categories that shift the label.
etaknn::FeatureMatrix random_matrix(etaknn::Rng& rng, std::size_t rows, std::size_t cols,
                                    double missing = 0.0, bool with_categorical = false);

// Node index of the leaf that a row reaches, found by walking the tree.
int leaf_of(const etaknn::Tree& t, const double* row, const std::uint8_t* ok);

}  // namespace fixtures
