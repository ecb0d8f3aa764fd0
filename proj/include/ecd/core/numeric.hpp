// Copyright (C) 2026 The ECD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>

namespace ecd {

/// Floor applied to probabilities before any logarithm.
inline constexpr double kProbFloor = 1e-12;
/// Hallucination scores live in [kScoreFloor, 1 - kScoreFloor].
inline constexpr double kScoreFloor = 1e-6;
/// Standard deviations below this mark a degenerate feature dimension.
inline constexpr double kStdFloor = 1e-8;

inline double clamped_log(double p) { return std::log(std::max(p, kProbFloor)); }

/// p * log p with 0 * log 0 := 0.
inline double xlogx(double p) { return p > 0.0 ? p * std::log(std::max(p, kProbFloor)) : 0.0; }

/// Numerically stable softmax evaluated in double precision.
template <typename Derived>
Eigen::VectorXd softmax(const Eigen::MatrixBase<Derived>& logits) {
  const Eigen::VectorXd z = logits.template cast<double>();
  const double peak = z.maxCoeff();
  Eigen::VectorXd e = (z.array() - peak).exp().matrix();
  return e / e.sum();
}

template <typename Derived>
Eigen::VectorXd log_softmax(const Eigen::MatrixBase<Derived>& logits) {
  const Eigen::VectorXd z = logits.template cast<double>();
  const double peak = z.maxCoeff();
  const double lse = peak + std::log((z.array() - peak).exp().sum());
  return (z.array() - lse).matrix();
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace ecd
