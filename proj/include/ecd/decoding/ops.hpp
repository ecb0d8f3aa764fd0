// Copyright (C) 2026 The ECD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include <span>
#include <vector>

#include "ecd/core/random.hpp"

namespace ecd::decoding {

/// Plausible candidates { y : p(y) >= beta * max p }, ascending ids. The
/// argmax always qualifies, so the set is never empty.
std::vector<int> apply_apc(const Eigen::VectorXd& p, double beta);

/// softmax over `candidates` of (1 + alpha) log p_theta - alpha log p_f;
/// zero elsewhere. `p_f[k]` is the hallucination score of candidates[k].
Eigen::VectorXd apply_ecd(const Eigen::VectorXd& p_theta, std::span<const double> p_f, double alpha,
                          std::span<const int> candidates);

/// softmax over `candidates` of (1 + gamma) log p - gamma log p_contrast.
Eigen::VectorXd contrast_distributions(const Eigen::VectorXd& p, const Eigen::VectorXd& p_contrast, double gamma,
                                       std::span<const int> candidates);

/// softmax(log p / temperature); the identity at temperature 1.
Eigen::VectorXd apply_temperature(const Eigen::VectorXd& p, double temperature);

/// Zeroes `token` and renormalizes. Leaves p unchanged if nothing else has mass.
Eigen::VectorXd suppress_token(const Eigen::VectorXd& p, int token);

/// argmax with the lowest id winning ties.
int greedy_pick(const Eigen::VectorXd& p);

/// Smallest prefix of tokens sorted by (probability desc, id asc) whose mass
/// reaches top_p. Zero-probability tokens are never included.
std::vector<int> nucleus_set(const Eigen::VectorXd& p, double top_p);

/// Draws exactly one uniform from `rng` and samples from the nucleus set.
int sample_nucleus(const Eigen::VectorXd& p, double top_p, Rng& rng);

}  // namespace ecd::decoding
