#include "etaknn/matrix.hpp"

#include "etaknn/error.hpp"

namespace etaknn {

std::string_view to_string(FeatureGroup g) noexcept {
  switch (g) {
    case FeatureGroup::similarity: return "similarity";
    case FeatureGroup::static_: return "static";
    case FeatureGroup::nodeflow: return "nodeflow";
    case FeatureGroup::combined: return "combined";
  }
  return "similarity";
}

FeatureGroup parse_feature_group(std::string_view token) {
  if (token == "similarity") return FeatureGroup::similarity;
  if (token == "static") return FeatureGroup::static_;
  if (token == "nodeflow") return FeatureGroup::nodeflow;
  if (token == "combined") return FeatureGroup::combined;
  fail(ErrorCode::schema, "unknown feature group '" + std::string(token) + "'");
}

std::string_view to_string(FeatureType t) noexcept {
  return t == FeatureType::categorical ? "categorical" : "numeric";
}

FeatureType parse_feature_type(std::string_view token) {
  if (token == "numeric") return FeatureType::numeric;
  if (token == "categorical") return FeatureType::categorical;
  fail(ErrorCode::schema, "unknown feature type '" + std::string(token) + "'");
}

std::ptrdiff_t FeatureMatrix::column_index(std::string_view name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i].name == name) return static_cast<std::ptrdiff_t>(i);
  }
  return -1;
}

void FeatureMatrix::append_row(const RowKey& key,
                               const std::vector<double>& row_values,
                               const std::vector<std::uint8_t>& row_valid,
                               std::optional<double> label) {
  if (row_values.size() != columns.size() ||
      row_valid.size() != columns.size()) {
    fail(ErrorCode::schema, "row width does not match the column list");
  }
  keys.push_back(key);
  values.insert(values.end(), row_values.begin(), row_values.end());
  valid.insert(valid.end(), row_valid.begin(), row_valid.end());
  labels.push_back(label.value_or(0.0));
  label_valid.push_back(label.has_value() ? 1 : 0);
}

void FeatureMatrix::append(const FeatureMatrix& other) {
  if (other.columns.size() != columns.size()) {
    fail(ErrorCode::schema, "cannot append matrices with different columns");
  }
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i].name != other.columns[i].name) {
      fail(ErrorCode::schema, "cannot append matrices with different columns");
    }
  }
  keys.insert(keys.end(), other.keys.begin(), other.keys.end());
  values.insert(values.end(), other.values.begin(), other.values.end());
  valid.insert(valid.end(), other.valid.begin(), other.valid.end());
  labels.insert(labels.end(), other.labels.begin(), other.labels.end());
  label_valid.insert(label_valid.end(), other.label_valid.begin(),
                     other.label_valid.end());
}

}  // namespace etaknn
