#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "etaknn/core.hpp"

namespace etaknn {

enum class FeatureGroup { similarity, static_, nodeflow, combined };
enum class FeatureType { numeric, categorical };

std::string_view to_string(FeatureGroup g) noexcept;
FeatureGroup parse_feature_group(std::string_view token);
std::string_view to_string(FeatureType t) noexcept;
FeatureType parse_feature_type(std::string_view token);

struct ColumnInfo {
  std::string name;
  FeatureGroup group = FeatureGroup::similarity;
  FeatureType type = FeatureType::numeric;
};

struct RowKey {
  std::size_t step = 0;
  SupersegmentId supersegment = 0;
};

/// One row per (supersegment, query step); cells carry an explicit validity
/// flag instead of sentinel values.
struct FeatureMatrix {
  std::vector<ColumnInfo> columns;
  std::vector<RowKey> keys;
  std::vector<double> values;       // row-major, n_rows x n_cols
  std::vector<std::uint8_t> valid;  // same layout
  std::vector<double> labels;       // one per row
  std::vector<std::uint8_t> label_valid;

  std::size_t n_rows() const noexcept { return keys.size(); }
  std::size_t n_cols() const noexcept { return columns.size(); }

  double value(std::size_t r, std::size_t c) const {
    return values[r * columns.size() + c];
  }
  bool is_valid(std::size_t r, std::size_t c) const {
    return valid[r * columns.size() + c] != 0;
  }

  /// -1 when absent.
  std::ptrdiff_t column_index(std::string_view name) const;

  void append_row(const RowKey& key, const std::vector<double>& row_values,
                  const std::vector<std::uint8_t>& row_valid,
                  std::optional<double> label);

  /// Appends rows of another matrix with identical columns.
  void append(const FeatureMatrix& other);
};

}  // namespace etaknn
