// Copyright (C) 2026 The ECD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "ecd/detector/boosted.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "ecd/core/error.hpp"
#include "ecd/core/numeric.hpp"
#include "ecd/core/random.hpp"
#include "ecd/detector/training_data.hpp"

namespace ecd::detector {
namespace {

struct SplitCandidate {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
};

struct NodeStats {
  double g = 0.0, h = 0.0;
};

double leaf_value(const NodeStats& s, double lambda) { return -s.g / (s.h + lambda); }
double score_term(double g, double h, double lambda) { return g * g / (h + lambda); }

// Grows one tree level by level. `node_of[i]` tracks the node holding row i
// (-1 for rows outside this tree's subsample). For each level every feature
// is scanned once in presorted order, accumulating left-side sums per node.
RegressionTree grow_tree(const Eigen::MatrixXd& x, const std::vector<std::vector<int>>& sorted,
                         const std::vector<double>& g, const std::vector<double>& h, std::vector<int>& node_of,
                         const BoostedConfig& config) {
  RegressionTree tree;
  NodeStats root;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (node_of[i] < 0) continue;
    root.g += g[i];
    root.h += h[i];
  }
  tree.nodes.push_back({-1, 0.0, -1, -1, leaf_value(root, config.lambda)});
  std::vector<NodeStats> stats{root};
  std::vector<int> frontier{0};

  for (int depth = 0; depth < config.max_depth && !frontier.empty(); ++depth) {
    const std::size_t n_nodes = tree.nodes.size();
    std::vector<int> slot(n_nodes, -1);
    for (std::size_t k = 0; k < frontier.size(); ++k) slot[static_cast<std::size_t>(frontier[k])] = static_cast<int>(k);
    std::vector<SplitCandidate> best(frontier.size());

    std::vector<NodeStats> left(frontier.size());
    std::vector<double> last_value(frontier.size());
    std::vector<char> started(frontier.size());
    for (int f = 0; f < static_cast<int>(x.cols()); ++f) {
      std::fill(left.begin(), left.end(), NodeStats{});
      std::fill(started.begin(), started.end(), 0);
      for (int i : sorted[static_cast<std::size_t>(f)]) {
        const int node = node_of[static_cast<std::size_t>(i)];
        if (node < 0) continue;
        const int k = slot[static_cast<std::size_t>(node)];
        if (k < 0) continue;
        const auto ku = static_cast<std::size_t>(k);
        const double v = x(i, f);
        if (started[ku] && v > last_value[ku]) {
          const NodeStats& total = stats[static_cast<std::size_t>(node)];
          const NodeStats& l = left[ku];
          const double rg = total.g - l.g, rh = total.h - l.h;
          if (l.h >= config.min_child_weight && rh >= config.min_child_weight) {
            const double gain = score_term(l.g, l.h, config.lambda) + score_term(rg, rh, config.lambda) -
                                score_term(total.g, total.h, config.lambda);
            if (gain > best[ku].gain + 1e-12) {
              double thr = last_value[ku] + 0.5 * (v - last_value[ku]);
              if (!(thr < v)) thr = last_value[ku];
              best[ku] = {gain, f, thr};
            }
          }
        }
        left[ku].g += g[static_cast<std::size_t>(i)];
        left[ku].h += h[static_cast<std::size_t>(i)];
        last_value[ku] = v;
        started[ku] = 1;
      }
    }

    std::vector<int> next;
    for (std::size_t k = 0; k < frontier.size(); ++k) {
      if (best[k].feature < 0) continue;
      const int parent = frontier[k];
      const int l = static_cast<int>(tree.nodes.size());
      tree.nodes.push_back({});
      tree.nodes.push_back({});
      stats.resize(tree.nodes.size());
      auto& p = tree.nodes[static_cast<std::size_t>(parent)];
      p.feature = best[k].feature;
      p.threshold = best[k].threshold;
      p.left = l;
      p.right = l + 1;
      next.push_back(l);
      next.push_back(l + 1);
    }
    if (next.empty()) break;
    // Route rows into the new children and recompute their sums.
    for (std::size_t i = 0; i < node_of.size(); ++i) {
      const int node = node_of[i];
      if (node < 0) continue;
      const auto& n = tree.nodes[static_cast<std::size_t>(node)];
      if (n.feature < 0) continue;
      const int child = x(static_cast<Eigen::Index>(i), n.feature) <= n.threshold ? n.left : n.right;
      node_of[i] = child;
      stats[static_cast<std::size_t>(child)].g += g[i];
      stats[static_cast<std::size_t>(child)].h += h[i];
    }
    for (int c : next) {
      tree.nodes[static_cast<std::size_t>(c)].value = leaf_value(stats[static_cast<std::size_t>(c)], config.lambda);
    }
    frontier = std::move(next);
  }
  return tree;
}

}  // namespace

double RegressionTree::predict(const Eigen::Ref<const Eigen::VectorXd>& z) const {
  int k = 0;
  while (nodes[static_cast<std::size_t>(k)].feature >= 0) {
    const auto& n = nodes[static_cast<std::size_t>(k)];
    k = z[n.feature] <= n.threshold ? n.left : n.right;
  }
  return nodes[static_cast<std::size_t>(k)].value;
}

int RegressionTree::depth() const {
  std::vector<int> d(nodes.size(), 0);
  int deepest = 0;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const auto& n = nodes[k];
    if (n.feature < 0) continue;
    d[static_cast<std::size_t>(n.left)] = d[static_cast<std::size_t>(n.right)] = d[k] + 1;
    deepest = std::max(deepest, d[k] + 1);
  }
  return deepest;
}

BoostedTreesModel train_boosted(const Eigen::MatrixXd& rows, std::span<const int> labels, const BoostedConfig& config,
                                std::span<const double> sample_weight) {
  if (config.n_trees < 0 || config.max_depth < 0 || !(config.learning_rate > 0.0) || !(config.lambda >= 0.0) ||
      !(config.subsample > 0.0 && config.subsample <= 1.0)) {
    throw ConfigError("boosted config needs n_trees >= 0, max_depth >= 0, learning_rate > 0, lambda >= 0 and "
                      "subsample in (0, 1]");
  }
  check_training_data(rows, labels, sample_weight);
  const auto n = static_cast<std::size_t>(rows.rows());
  std::vector<double> w(n, 1.0);
  if (!sample_weight.empty()) w.assign(sample_weight.begin(), sample_weight.end());

  double pos = 0.0, total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    pos += w[i] * labels[i];
    total += w[i];
  }
  BoostedTreesModel m;
  m.n_features = static_cast<int>(rows.cols());
  m.learning_rate = config.learning_rate;
  m.init_score = std::log(pos / (total - pos));

  std::vector<std::vector<int>> sorted(static_cast<std::size_t>(rows.cols()));
  for (Eigen::Index f = 0; f < rows.cols(); ++f) {
    auto& idx = sorted[static_cast<std::size_t>(f)];
    idx.resize(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return rows(a, f) < rows(b, f); });
  }

  std::vector<double> raw(n, m.init_score), g(n), h(n);
  std::vector<int> node_of(n);
  std::vector<std::size_t> perm(n);
  Rng rng(config.seed);
  const auto n_sub = static_cast<std::size_t>(std::max(1.0, std::round(config.subsample * static_cast<double>(n))));
  for (int t = 0; t < config.n_trees; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      const double p = sigmoid(raw[i]);
      g[i] = w[i] * (p - labels[i]);
      h[i] = w[i] * p * (1.0 - p);
    }
    if (n_sub < n) {
      std::iota(perm.begin(), perm.end(), 0);
      rng.shuffle(perm.begin(), perm.end());
      std::fill(node_of.begin(), node_of.end(), -1);
      for (std::size_t k = 0; k < n_sub; ++k) node_of[perm[k]] = 0;
    } else {
      std::fill(node_of.begin(), node_of.end(), 0);
    }
    RegressionTree tree = grow_tree(rows, sorted, g, h, node_of, config);
    for (std::size_t i = 0; i < n; ++i) {
      raw[i] += config.learning_rate * tree.predict(rows.row(static_cast<Eigen::Index>(i)).transpose());
    }
    m.trees.push_back(std::move(tree));
  }
  return m;
}

double raw_score(const BoostedTreesModel& model, const Eigen::Ref<const Eigen::VectorXd>& z) {
  if (z.size() != model.n_features) {
    throw DataError("feature vector has " + std::to_string(z.size()) + " values, boosted model expects " +
                    std::to_string(model.n_features));
  }
  double s = model.init_score;
  for (const auto& t : model.trees) s += model.learning_rate * t.predict(z);
  return s;
}

}  // namespace ecd::detector
