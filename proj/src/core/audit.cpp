// Copyright (C) 2026 The ECD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "ecd/core/audit.hpp"

#include <cmath>
#include <mutex>

namespace ecd::audit {
namespace {

std::mutex g_mutex;
Summary g_summary;

void note(std::string_view what, const std::string& detail) {
  if (g_summary.first_problem.empty()) g_summary.first_problem = std::string(what) + ": " + detail;
}

// Caller holds the lock.
void check_row(const double* data, Eigen::Index n, Eigen::Index stride, std::string_view what) {
  double sum = 0.0;
  bool finite = true;
  bool negative = false;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double v = data[i * stride];
    finite = finite && std::isfinite(v);
    negative = negative || v < 0.0;
    sum += v;
  }
  if (!finite) {
    ++g_summary.non_finite;
    note(what, "non-finite probability");
    return;
  }
  const double err = std::abs(sum - 1.0);
  g_summary.max_sum_error = std::max(g_summary.max_sum_error, err);
  if (err > kSumTolerance || negative) {
    ++g_summary.sum_violations;
    note(what, negative ? "negative probability" : "sums to " + std::to_string(sum));
  }
}

}  // namespace

void enable(bool on) { detail::g_enabled.store(on); }

void reset() {
  std::lock_guard lock(g_mutex);
  g_summary = Summary{};
}

Summary summary() {
  std::lock_guard lock(g_mutex);
  return g_summary;
}

void check_distribution(const Eigen::Ref<const Eigen::VectorXd>& p, std::string_view what) {
  std::lock_guard lock(g_mutex);
  ++g_summary.distributions;
  check_row(p.data(), p.size(), p.innerStride(), what);
}

void check_attention(const Eigen::Ref<const Eigen::MatrixXd>& rows, std::string_view what) {
  std::lock_guard lock(g_mutex);
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    ++g_summary.attention_rows;
    const Eigen::VectorXd row = rows.row(r).transpose();
    check_row(row.data(), row.size(), 1, what);
  }
}

void check_features(std::span<const double> values, std::string_view what) {
  std::lock_guard lock(g_mutex);
  ++g_summary.feature_vectors;
  for (double v : values) {
    if (!std::isfinite(v)) {
      ++g_summary.non_finite;
      note(what, "non-finite feature value");
      return;
    }
  }
}

}  // namespace ecd::audit
