// Copyright (C) 2026 The ECD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "ecd/detector/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "ecd/core/error.hpp"

namespace ecd::detector {
namespace {

struct ClassCounts {
  std::size_t pos = 0, neg = 0;
};

ClassCounts check_inputs(std::span<const double> scores, std::span<const int> labels, bool need_both) {
  if (scores.size() != labels.size()) {
    throw DataError("metric inputs differ in length: " + std::to_string(scores.size()) + " scores, " +
                    std::to_string(labels.size()) + " labels");
  }
  ClassCounts c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw DataError("labels must be 0 or 1");
    if (std::isnan(scores[i])) throw DataError("score is NaN");
    labels[i] == 1 ? ++c.pos : ++c.neg;
  }
  if (need_both && (c.pos == 0 || c.neg == 0)) {
    throw UndefinedMetricError("metric undefined: labels contain a single class");
  }
  return c;
}

// Indices sorted by descending score; ties keep input order.
std::vector<std::size_t> descending_order(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

}  // namespace

double auroc(std::span<const double> scores, std::span<const int> labels) {
  const auto counts = check_inputs(scores, labels, true);
  const auto order = descending_order(scores);
  // Walk tie groups from the top; each positive in a group beats every
  // negative below it and ties with half of the negatives inside it.
  double concordant = 0.0;
  std::size_t neg_below = counts.neg;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::size_t pos = 0, neg = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      labels[order[j]] == 1 ? ++pos : ++neg;
      ++j;
    }
    neg_below -= neg;
    concordant += static_cast<double>(pos) * (static_cast<double>(neg_below) + 0.5 * static_cast<double>(neg));
    i = j;
  }
  return concordant / (static_cast<double>(counts.pos) * static_cast<double>(counts.neg));
}

double auprc(std::span<const double> scores, std::span<const int> labels) {
  const auto counts = check_inputs(scores, labels, true);
  const auto order = descending_order(scores);
  double area = 0.0, prev_recall = 0.0;
  std::size_t tp = 0, seen = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      if (labels[order[j]] == 1) ++tp;
      ++j;
    }
    seen = j;
    const double recall = static_cast<double>(tp) / static_cast<double>(counts.pos);
    const double precision = static_cast<double>(tp) / static_cast<double>(seen);
    area += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j;
  }
  return area;
}

double accuracy(std::span<const double> scores, std::span<const int> labels, double tau) {
  check_inputs(scores, labels, false);
  if (scores.empty()) throw UndefinedMetricError("accuracy of an empty set");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if ((scores[i] >= tau ? 1 : 0) == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(scores.size());
}

double prevalence(std::span<const int> labels) {
  if (labels.empty()) throw UndefinedMetricError("prevalence of an empty set");
  return static_cast<double>(std::count(labels.begin(), labels.end(), 1)) / static_cast<double>(labels.size());
}

}  // namespace ecd::detector
