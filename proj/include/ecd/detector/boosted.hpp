// Copyright (C) 2026 The ECD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <vector>

namespace ecd::detector {

struct BoostedConfig {
  int n_trees = 200;
  int max_depth = 3;
  double learning_rate = 0.1;
  /// L2 penalty on leaf values.
  double lambda = 1.0;
  /// Minimum hessian mass on each side of a split.
  double min_child_weight = 1e-3;
  /// Row fraction drawn (without replacement) per tree; 1 uses every row.
  double subsample = 1.0;
  std::uint64_t seed = 0;
};

/// Flat regression tree. A node with feature < 0 is a leaf; otherwise rows
/// with x[feature] <= threshold go left.
struct RegressionTree {
  struct Node {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
  };
  std::vector<Node> nodes;

  double predict(const Eigen::Ref<const Eigen::VectorXd>& z) const;
  int depth() const;
};

struct BoostedTreesModel {
  double init_score = 0.0;  // prior log-odds
  double learning_rate = 0.1;
  int n_features = 0;
  std::vector<RegressionTree> trees;

  int dimension() const { return n_features; }
};

/// Newton boosting on the logistic loss with exact greedy splits. A
/// duplicated row behaves like one row of weight 2.
BoostedTreesModel train_boosted(const Eigen::MatrixXd& rows, std::span<const int> labels,
                                const BoostedConfig& config = {}, std::span<const double> sample_weight = {});

double raw_score(const BoostedTreesModel& model, const Eigen::Ref<const Eigen::VectorXd>& z);

}  // namespace ecd::detector
