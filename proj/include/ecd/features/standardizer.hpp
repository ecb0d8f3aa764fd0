// Copyright (C) 2026 The ECD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include <vector>

#include <json.hpp>

namespace ecd::features {

/// Per-dimension training mean and (population) standard deviation.
/// Dimensions whose spread is below kStdFloor are flagged degenerate and map
/// to 0; their stored std is 1 so unapply stays well defined.
struct StandardizationStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;
  std::vector<bool> degenerate;

  int dimension() const { return static_cast<int>(mean.size()); }
};

/// Rows are feature vectors. Needs at least two rows.
StandardizationStats fit_standardizer(const Eigen::MatrixXd& rows);

Eigen::VectorXd apply_standardizer(const StandardizationStats& stats, const Eigen::VectorXd& x);
/// Standardizes every row in place.
void apply_standardizer_rows(const StandardizationStats& stats, Eigen::MatrixXd& rows);
/// Inverse map; degenerate dimensions come back as the training mean.
Eigen::VectorXd unapply_standardizer(const StandardizationStats& stats, const Eigen::VectorXd& z);

void to_json(nlohmann::json& j, const StandardizationStats& s);
void from_json(const nlohmann::json& j, StandardizationStats& s);

}  // namespace ecd::features
