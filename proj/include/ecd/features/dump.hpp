// Copyright (C) 2026 The ECD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include "ecd/features/schema.hpp"

namespace ecd::features {

/// One JSON-lines row of a feature dump.
struct FeatureRecord {
  int step = 0;
  int token_id = 0;
  std::optional<int> label;
  std::vector<double> values;
  /// Caption the token came from; -1 when unknown.
  int sequence = -1;
};

void write_feature_record(std::ostream& out, const FeatureRecord& record);
void write_feature_dump(const std::filesystem::path& path, const std::vector<FeatureRecord>& records);
/// With require_label, rows lacking a 0/1 label are a DataError. Every row
/// must have `dimension` values when dimension >= 0.
std::vector<FeatureRecord> read_feature_dump(const std::filesystem::path& path, bool require_label,
                                             int dimension = -1);

void write_schema(const std::filesystem::path& path, const FeatureSchema& schema);
FeatureSchema read_schema(const std::filesystem::path& path);

/// Stacks the values of all records as rows.
Eigen::MatrixXd feature_matrix(const std::vector<FeatureRecord>& records);
/// Labels as 0/1; records must all be labelled.
std::vector<int> feature_labels(const std::vector<FeatureRecord>& records);

}  // namespace ecd::features
