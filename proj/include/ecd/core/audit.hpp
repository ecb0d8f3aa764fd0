// Copyright (C) 2026 The ECD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include <atomic>
#include <span>
#include <string>
#include <string_view>

// Opt-in runtime checks of the normalization and finiteness invariants.
// The model, the decoding operators and the feature extractor report every
// distribution, attention row and feature vector they produce while the
// audit is enabled. Disabled by default; the cost is then one atomic load.
namespace ecd::audit {

inline constexpr double kSumTolerance = 1e-6;

struct Summary {
  long distributions = 0;
  long attention_rows = 0;
  long feature_vectors = 0;
  long sum_violations = 0;
  long non_finite = 0;
  double max_sum_error = 0.0;
  std::string first_problem;
};

namespace detail {
inline std::atomic<bool> g_enabled{false};
}

inline bool enabled() { return detail::g_enabled.load(std::memory_order_relaxed); }
void enable(bool on);
void reset();
Summary summary();

/// Entries must be finite and non-negative and sum to 1.
void check_distribution(const Eigen::Ref<const Eigen::VectorXd>& p, std::string_view what);
/// Each row is one head's attention over the keys.
void check_attention(const Eigen::Ref<const Eigen::MatrixXd>& rows, std::string_view what);
void check_features(std::span<const double> values, std::string_view what);

}  // namespace ecd::audit
