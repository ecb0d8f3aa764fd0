// Copyright (C) 2026 The ECD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include <span>

namespace ecd::detector {

/// Rejects mismatched lengths, non-binary or single-class labels, non-finite
/// features and non-positive sample weights.
void check_training_data(const Eigen::MatrixXd& rows, std::span<const int> labels,
                         std::span<const double> sample_weight = {});

}  // namespace ecd::detector
