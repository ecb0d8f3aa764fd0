// Copyright (C) 2026 The ECD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "ecd/detector/training_data.hpp"

#include <cmath>
#include <string>

#include "ecd/core/error.hpp"

namespace ecd::detector {

void check_training_data(const Eigen::MatrixXd& rows, std::span<const int> labels,
                         std::span<const double> sample_weight) {
  if (static_cast<std::size_t>(rows.rows()) != labels.size()) {
    throw DataError("training data has " + std::to_string(rows.rows()) + " rows but " +
                    std::to_string(labels.size()) + " labels");
  }
  if (!sample_weight.empty() && sample_weight.size() != labels.size()) {
    throw DataError("sample weights do not match the number of examples");
  }
  bool has_pos = false, has_neg = false;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1) {
      has_pos = true;
    } else if (labels[i] == 0) {
      has_neg = true;
    } else {
      throw DataError("labels must be 0 or 1");
    }
    if (!sample_weight.empty() && !(sample_weight[i] > 0.0)) throw DataError("sample weights must be positive");
  }
  if (!has_pos || !has_neg) throw DataError("training data needs examples of both classes");
  if (!rows.allFinite()) throw DataError("training features contain non-finite values");
}

}  // namespace ecd::detector
