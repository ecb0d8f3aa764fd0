// Copyright (C) 2026 The ECD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "ecd/decoding/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ecd/core/audit.hpp"
#include "ecd/core/error.hpp"
#include "ecd/core/numeric.hpp"

namespace ecd::decoding {
namespace {

void check_candidates(std::span<const int> candidates, Eigen::Index vocab) {
  if (candidates.empty()) throw InvariantError("empty candidate set");
  for (int y : candidates) {
    if (y < 0 || y >= vocab) throw InvariantError("candidate token " + std::to_string(y) + " out of range");
  }
}

// Softmax of logits defined on the candidates only.
Eigen::VectorXd candidate_softmax(Eigen::Index vocab, std::span<const int> candidates,
                                  const std::vector<double>& logits) {
  const double peak = *std::max_element(logits.begin(), logits.end());
  Eigen::VectorXd out = Eigen::VectorXd::Zero(vocab);
  double total = 0.0;
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    const double e = std::exp(logits[k] - peak);
    out[candidates[k]] = e;
    total += e;
  }
  return out / total;
}

}  // namespace

std::vector<int> apply_apc(const Eigen::VectorXd& p, double beta) {
  const double cut = beta * p.maxCoeff();
  std::vector<int> out;
  for (Eigen::Index y = 0; y < p.size(); ++y) {
    if (p[y] >= cut) out.push_back(static_cast<int>(y));
  }
  return out;
}

Eigen::VectorXd apply_ecd(const Eigen::VectorXd& p_theta, std::span<const double> p_f, double alpha,
                          std::span<const int> candidates) {
  check_candidates(candidates, p_theta.size());
  if (p_f.size() != candidates.size()) throw InvariantError("one hallucination score per candidate required");
  std::vector<double> logits(candidates.size());
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    const double pf = std::clamp(p_f[k], kScoreFloor, 1.0 - kScoreFloor);
    logits[k] = (1.0 + alpha) * clamped_log(p_theta[candidates[k]]) - alpha * std::log(pf);
  }
  Eigen::VectorXd out = candidate_softmax(p_theta.size(), candidates, logits);
  if (audit::enabled()) audit::check_distribution(out, "ecd distribution");
  return out;
}

Eigen::VectorXd contrast_distributions(const Eigen::VectorXd& p, const Eigen::VectorXd& p_contrast, double gamma,
                                       std::span<const int> candidates) {
  check_candidates(candidates, p.size());
  if (p_contrast.size() != p.size()) throw InvariantError("contrast distribution has the wrong size");
  std::vector<double> logits(candidates.size());
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    const int y = candidates[k];
    logits[k] = (1.0 + gamma) * clamped_log(p[y]) - gamma * clamped_log(p_contrast[y]);
  }
  Eigen::VectorXd out = candidate_softmax(p.size(), candidates, logits);
  if (audit::enabled()) audit::check_distribution(out, "contrastive distribution");
  return out;
}

Eigen::VectorXd apply_temperature(const Eigen::VectorXd& p, double temperature) {
  if (temperature == 1.0) return p;
  Eigen::VectorXd logits(p.size());
  for (Eigen::Index y = 0; y < p.size(); ++y) {
    logits[y] = p[y] > 0.0 ? std::log(p[y]) / temperature : -std::numeric_limits<double>::infinity();
  }
  return softmax(logits);
}

Eigen::VectorXd suppress_token(const Eigen::VectorXd& p, int token) {
  if (token < 0 || token >= p.size()) return p;
  const double rest = 1.0 - p[token];
  if (!(rest > 0.0)) return p;
  Eigen::VectorXd out = p;
  out[token] = 0.0;
  return out / out.sum();
}

int greedy_pick(const Eigen::VectorXd& p) {
  Eigen::Index best = 0;
  for (Eigen::Index y = 1; y < p.size(); ++y) {
    if (p[y] > p[best]) best = y;
  }
  return static_cast<int>(best);
}

std::vector<int> nucleus_set(const Eigen::VectorXd& p, double top_p) {
  std::vector<int> order(static_cast<std::size_t>(p.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return p[a] > p[b]; });
  std::vector<int> out;
  double mass = 0.0;
  for (int y : order) {
    if (!(p[y] > 0.0)) break;
    out.push_back(y);
    mass += p[y];
    if (mass >= top_p) break;
  }
  if (out.empty()) out.push_back(order.front());
  return out;
}

int sample_nucleus(const Eigen::VectorXd& p, double top_p, Rng& rng) {
  const std::vector<int> set = nucleus_set(p, top_p);
  double mass = 0.0;
  for (int y : set) mass += p[y];
  const double u = rng.uniform() * mass;
  double acc = 0.0;
  for (int y : set) {
    acc += p[y];
    if (u < acc) return y;
  }
  return set.back();
}

}  // namespace ecd::decoding
