#pragma once

#include "fairaudit/dataset.hpp"

#include <optional>
#include <string>
#include <vector>

namespace fairaudit {

/// Column binding for CSV ingestion. Feature columns may be listed
/// explicitly; when empty, every column not otherwise bound is a covariate.
/// Categorical covariates must be pre-encoded numerically.
struct CsvSchema {
  std::string s_col = "s";
  std::string yhat_col = "yhat";
  std::optional<std::string> y_col;
  std::optional<std::string> logit_col;
  std::optional<std::string> weight_col;  // only for weighted distributions
  std::vector<std::string> feature_cols;
};

/// Parses a CSV with a header row. Errors (missing column, non-binary
/// S/Y/Yhat value, unparseable numeric cell, no data rows) are reported with
/// the offending 1-based data row index.
Dataset load_csv(const std::string& path, const CsvSchema& schema);

/// As load_csv, but reads schema.weight_col (default "weight") as atom
/// weights and normalizes them to sum to 1.
WeightedDistribution load_weighted_csv(const std::string& path,
                                       const CsvSchema& schema);

void save_csv(const std::string& path, const Dataset& data);
void save_csv(const std::string& path, const WeightedDistribution& dist);

}  // namespace fairaudit
