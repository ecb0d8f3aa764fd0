// Copyright (C) 2026 The ECD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>

namespace ecd::detector {

// Labels are 1 for hallucinated tokens (the positive class) and 0 otherwise.
// AUROC and AUPRC throw UndefinedMetricError unless both classes occur.

/// Tie-corrected pairwise concordance: P(s+ > s-) + 0.5 P(s+ == s-).
double auroc(std::span<const double> scores, std::span<const int> labels);

/// Average precision: sum over distinct thresholds (descending) of
/// (R_k - R_{k-1}) * P_k with R_0 = 0. Tied scores form one threshold.
double auprc(std::span<const double> scores, std::span<const int> labels);

/// Fraction of tokens where (score >= tau) equals the label.
double accuracy(std::span<const double> scores, std::span<const int> labels, double tau = 0.5);

double prevalence(std::span<const int> labels);

}  // namespace ecd::detector
