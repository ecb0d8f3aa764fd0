// Copyright (C) 2026 The ECD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <vector>

namespace ecd::detector {

struct LogisticConfig {
  int max_iter = 1000;
  /// Stop once the gradient norm falls to this value.
  double tol = 1e-6;
  /// Penalty (l2 / 2) * ||w||^2; the bias is not penalized.
  double l2 = 1e-3;
  /// Recorded for reproducibility; the solver itself draws no randomness.
  std::uint64_t seed = 0;
};

struct LogisticModel {
  Eigen::VectorXd weights;
  double bias = 0.0;
  int iterations = 0;
  double final_loss = 0.0;
  /// Objective after each accepted step, starting with the initial point.
  std::vector<double> loss_history;

  int dimension() const { return static_cast<int>(weights.size()); }
};

/// Mean logistic loss plus the l2 penalty, minimized by gradient descent with
/// Armijo backtracking, so the objective never increases between iterations.
/// `rows` holds one standardized feature vector per row; `sample_weight` may
/// be empty (all ones).
LogisticModel train_logistic(const Eigen::MatrixXd& rows, std::span<const int> labels,
                             const LogisticConfig& config = {}, std::span<const double> sample_weight = {});

double raw_score(const LogisticModel& model, const Eigen::Ref<const Eigen::VectorXd>& z);

/// Objective used by the solver, exposed for tests.
double logistic_objective(const Eigen::MatrixXd& rows, std::span<const int> labels, std::span<const double> weight,
                          const Eigen::VectorXd& w, double bias, double l2);

}  // namespace ecd::detector
