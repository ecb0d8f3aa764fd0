// Copyright (C) 2026 The ECD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "ecd/core/error.hpp"
#include "ecd/core/log.hpp"
#include "ecd/core/numeric.hpp"
#include "ecd/core/random.hpp"
#include "ecd/detector/detector.hpp"
#include "ecd/detector/metrics.hpp"
#include "test_util.hpp"

namespace ecd {
namespace {

using namespace detector;

// Exhaustive pairwise concordance.
double brute_auroc(const std::vector<double>& s, const std::vector<int>& y) {
  double num = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[i] != 1 || y[j] != 0) continue;
      pairs += 1.0;
      num += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  }
  return num / pairs;
}

// Sweep every distinct score as a ">= threshold" cut, highest first.
double brute_auprc(const std::vector<double>& s, const std::vector<int>& y) {
  std::set<double, std::greater<>> thresholds(s.begin(), s.end());
  const double n_pos = static_cast<double>(std::count(y.begin(), y.end(), 1));
  double area = 0.0, prev_recall = 0.0;
  for (double t : thresholds) {
    double tp = 0.0, predicted = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] >= t) {
        predicted += 1.0;
        tp += y[i];
      }
    }
    const double recall = tp / n_pos;
    area += (recall - prev_recall) * (tp / predicted);
    prev_recall = recall;
  }
  return area;
}

struct Dataset {
  Eigen::MatrixXd x;
  std::vector<int> y;
};

Dataset planted(int n, double prevalence, double shift, std::uint64_t seed, int dims = 5) {
  Rng rng(seed);
  Dataset d{Eigen::MatrixXd(n, dims), std::vector<int>(static_cast<std::size_t>(n))};
  for (int i = 0; i < n; ++i) {
    const int label = rng.uniform() < prevalence ? 1 : 0;
    d.y[static_cast<std::size_t>(i)] = label;
    for (int c = 0; c < dims; ++c) d.x(i, c) = rng.normal() + (c == 0 ? shift * label : 0.0);
  }
  d.y[0] = 1;
  d.y[1] = 0;
  return d;
}

Dataset xor_clusters(int per_cluster, std::uint64_t seed) {
  Rng rng(seed);
  Dataset d{Eigen::MatrixXd(4 * per_cluster, 2), {}};
  int r = 0;
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      for (int k = 0; k < per_cluster; ++k, ++r) {
        d.x(r, 0) = (a ? 2.0 : -2.0) + 0.3 * rng.normal();
        d.x(r, 1) = (b ? 2.0 : -2.0) + 0.3 * rng.normal();
        d.y.push_back(a ^ b);
      }
    }
  }
  return d;
}

std::vector<double> scores_of(const Classifier& m, const Eigen::MatrixXd& x) {
  std::vector<double> s;
  for (Eigen::Index r = 0; r < x.rows(); ++r) s.push_back(predict_score(m, x.row(r).transpose()));
  return s;
}

TEST(Metrics, SmallExamples) {
  EXPECT_DOUBLE_EQ(auroc(std::vector<double>{0.1, 0.9}, std::vector<int>{0, 1}), 1.0);
  EXPECT_DOUBLE_EQ(auprc(std::vector<double>{0.1, 0.9}, std::vector<int>{0, 1}), 1.0);
  EXPECT_DOUBLE_EQ(auroc(std::vector<double>{0.9, 0.1}, std::vector<int>{0, 1}), 0.0);
  const std::vector<double> s{0.8, 0.7, 0.6, 0.5};
  const std::vector<int> y{1, 0, 1, 0};
  EXPECT_EQ(auroc(s, y), 0.75);
  EXPECT_NEAR(auprc(s, y), brute_auprc(s, y), 1e-12);
  EXPECT_NEAR(auprc(s, y), 0.5 * 1.0 + 0.5 * (2.0 / 3.0), 1e-12);
  EXPECT_DOUBLE_EQ(auroc(std::vector<double>{0.5, 0.5}, std::vector<int>{0, 1}), 0.5);
}

TEST(Metrics, MatchBruteForceOnRandomSets) {
  Rng rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform_index(49));
    std::vector<double> s(static_cast<std::size_t>(n));
    std::vector<int> y(static_cast<std::size_t>(n));
    const bool coarse = trial % 2 == 0;  // half the sets carry many ties
    for (int i = 0; i < n; ++i) {
      s[i] = coarse ? std::floor(rng.uniform() * 5.0) / 5.0 : rng.uniform();
      y[i] = rng.uniform() < 0.3 ? 1 : 0;
    }
    y[0] = 1;
    y[1] = 0;
    EXPECT_NEAR(auroc(s, y), brute_auroc(s, y), 1e-9);
    EXPECT_NEAR(auprc(s, y), brute_auprc(s, y), 1e-9);
  }
}

TEST(Metrics, AurocInvariantUnderMonotoneTransform) {
  Rng rng(5);
  std::vector<double> s(60), t(60);
  std::vector<int> y(60);
  for (int i = 0; i < 60; ++i) {
    s[i] = std::round(rng.normal() * 4.0) / 4.0;
    t[i] = std::exp(3.0 * s[i]) - 7.0;
    y[i] = rng.uniform() < 0.4;
  }
  EXPECT_DOUBLE_EQ(auroc(s, y), auroc(t, y));
  EXPECT_DOUBLE_EQ(auprc(s, y), auprc(t, y));
}

TEST(Metrics, RandomScoresConcentrateAtPrevalence) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    std::vector<double> s(10000);
    std::vector<int> y(10000);
    for (std::size_t i = 0; i < s.size(); ++i) {
      s[i] = rng.uniform();
      y[i] = rng.uniform() < 0.15;
    }
    EXPECT_NEAR(auprc(s, y), prevalence(y), 0.05);
  }
}

TEST(Metrics, AccuracyAtExtremeThresholds) {
  Rng rng(8);
  std::vector<double> s;
  std::vector<int> y;
  for (int i = 0; i < 50; ++i) {
    s.push_back(predict_score(LogisticModel{Eigen::VectorXd::Constant(1, 30.0), 0.0, 0, 0.0, {}}, Eigen::VectorXd::Constant(1, rng.normal())));
    y.push_back(i % 3 == 0);
  }
  EXPECT_DOUBLE_EQ(accuracy(s, y, 0.0), prevalence(y));
  EXPECT_DOUBLE_EQ(accuracy(s, y, 1.0), 1.0 - prevalence(y));
}

TEST(Metrics, SingleClassIsUndefined) {
  const std::vector<double> s{0.1, 0.2};
  EXPECT_THROW(auroc(s, std::vector<int>{1, 1}), UndefinedMetricError);
  EXPECT_THROW(auprc(s, std::vector<int>{0, 0}), UndefinedMetricError);
  EXPECT_THROW(auroc(s, std::vector<int>{0}), DataError);
}

TEST(Classify, BoundaryAndMonotone) {
  EXPECT_EQ(classify(0.5, 0.5), 1);
  EXPECT_EQ(classify(0.49, 0.5), 0);
  EXPECT_EQ(classify(kScoreFloor, 0.0), 1);
  EXPECT_EQ(classify(1.0 - kScoreFloor, 1.0), 0);
  for (double p : {0.1, 0.4, 0.7}) {
    int prev = 1;
    for (double tau = 0.0; tau <= 1.0; tau += 0.05) {
      const int c = classify(p, tau);
      EXPECT_LE(c, prev);
      prev = c;
    }
  }
}

TEST(Logistic, ScoreClampAndZeroModel) {
  const LogisticModel zero{Eigen::VectorXd::Zero(3), 0.0, 0, 0.0, {}};
  EXPECT_DOUBLE_EQ(predict_score(zero, Eigen::VectorXd::Ones(3)), 0.5);
  const LogisticModel big{Eigen::VectorXd::Zero(1), 20.0, 0, 0.0, {}};
  EXPECT_DOUBLE_EQ(predict_score(big, Eigen::VectorXd::Zero(1)), 1.0 - 1e-6);
  const LogisticModel small{Eigen::VectorXd::Zero(1), -40.0, 0, 0.0, {}};
  EXPECT_DOUBLE_EQ(predict_score(small, Eigen::VectorXd::Zero(1)), 1e-6);
  EXPECT_THROW(predict_score(zero, Eigen::VectorXd::Ones(2)), DataError);
}

TEST(Logistic, SeparableOneDimension) {
  Eigen::MatrixXd x(100, 1);
  std::vector<int> y;
  for (int i = 0; i < 100; ++i) {
    x(i, 0) = i % 2 ? 1.0 : -1.0;
    y.push_back(i % 2);
  }
  const auto m = train_logistic(x, y);
  EXPECT_GT(m.weights[0], 0.0);
  EXPECT_DOUBLE_EQ(auroc(scores_of(m, x), y), 1.0);
}

TEST(Logistic, LossNonIncreasingAndConverges) {
  const auto d = planted(400, 0.2, 1.5, 3);
  const auto m = train_logistic(d.x, d.y);
  ASSERT_GE(m.loss_history.size(), 2u);
  for (std::size_t i = 1; i < m.loss_history.size(); ++i) EXPECT_LE(m.loss_history[i], m.loss_history[i - 1]);
  EXPECT_LT(m.iterations, 1000);
  EXPECT_DOUBLE_EQ(m.final_loss, m.loss_history.back());
  // Oracle: the objective at the solution is below nearby perturbations.
  Rng rng(1);
  for (int k = 0; k < 20; ++k) {
    Eigen::VectorXd w = m.weights;
    for (auto& v : w) v += 1e-3 * rng.normal();
    EXPECT_GE(logistic_objective(d.x, d.y, {}, w, m.bias, 1e-3), m.final_loss - 1e-12);
  }
}

TEST(Logistic, FlippedLabelsNegateWeights) {
  const auto d = planted(300, 0.3, 1.0, 7);
  std::vector<int> flipped;
  for (int v : d.y) flipped.push_back(1 - v);
  const auto a = train_logistic(d.x, d.y);
  const auto b = train_logistic(d.x, flipped);
  EXPECT_LT((a.weights + b.weights).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_NEAR(a.bias, -b.bias, 1e-6);
}

TEST(Logistic, ZeroVarianceFeatureGetsZeroWeight) {
  auto d = planted(200, 0.3, 2.0, 9, 3);
  d.x.col(2).setZero();
  const auto m = train_logistic(d.x, d.y);
  EXPECT_EQ(m.weights[2], 0.0);
}

TEST(Logistic, RejectsBadData) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(3, 2);
  EXPECT_THROW(train_logistic(x, std::vector<int>{1, 1, 1}), DataError);
  EXPECT_THROW(train_logistic(x, std::vector<int>{1, 0}), DataError);
  x(0, 0) = std::nan("");
  EXPECT_THROW(train_logistic(x, std::vector<int>{1, 0, 0}), DataError);
}

TEST(Boosted, XorNeedsTrees) {
  const auto d = xor_clusters(50, 4);
  const auto gb = train_boosted(d.x, d.y);
  EXPECT_GE(auroc(scores_of(gb, d.x), d.y), 0.99);
  const auto lr = train_logistic(d.x, d.y);
  EXPECT_LE(auroc(scores_of(lr, d.x), d.y), 0.6);
  for (const auto& t : gb.trees) {
    EXPECT_LE(t.depth(), 3);
    for (const auto& n : t.nodes) EXPECT_LT(n.feature, 2);
  }
}

TEST(Boosted, EmptyEnsembleIsPrior) {
  const auto d = planted(100, 0.25, 1.0, 2);
  BoostedConfig c;
  c.n_trees = 0;
  const auto m = train_boosted(d.x, d.y, c);
  const double prev = prevalence(d.y);
  EXPECT_NEAR(predict_score(m, d.x.row(3).transpose()), prev, 1e-12);
}

TEST(Boosted, DuplicatesEqualWeights) {
  const auto d = planted(60, 0.3, 1.0, 12, 3);
  // Duplicate the first 20 rows; the weighted model counts them twice.
  Eigen::MatrixXd dup(80, 3);
  dup << d.x, d.x.topRows(20);
  std::vector<int> ydup = d.y;
  ydup.insert(ydup.end(), d.y.begin(), d.y.begin() + 20);
  std::vector<double> w(60, 1.0);
  std::fill(w.begin(), w.begin() + 20, 2.0);
  BoostedConfig c;
  c.n_trees = 20;
  const auto a = train_boosted(dup, ydup, c);
  const auto b = train_boosted(d.x, d.y, c, w);
  ASSERT_EQ(a.trees.size(), b.trees.size());
  EXPECT_NEAR(a.init_score, b.init_score, 1e-12);
  Rng rng(3);
  for (int k = 0; k < 50; ++k) {
    Eigen::VectorXd z(3);
    for (auto& v : z) v = 1.5 * rng.normal();
    EXPECT_NEAR(raw_score(a, z), raw_score(b, z), 1e-9);
  }
}

TEST(Boosted, HandBuiltStump) {
  BoostedTreesModel m;
  m.n_features = 2;
  m.init_score = -1.0;
  m.learning_rate = 0.5;
  RegressionTree t;
  t.nodes = {{1, 0.25, 1, 2, 0.0}, {-1, 0.0, -1, -1, -2.0}, {-1, 0.0, -1, -1, 4.0}};
  m.trees.push_back(t);
  Eigen::VectorXd z(2);
  z << 9.0, 0.25;  // x[1] <= 0.25 goes left
  EXPECT_NEAR(predict_score(m, z), 1.0 / (1.0 + std::exp(2.0)), 1e-15);
  z << -9.0, 0.3;
  EXPECT_NEAR(predict_score(m, z), 1.0 / (1.0 + std::exp(-1.0)), 1e-15);
}

TEST(Boosted, Deterministic) {
  const auto d = planted(150, 0.3, 1.0, 5);
  BoostedConfig c;
  c.n_trees = 15;
  c.subsample = 0.7;
  c.seed = 4;
  const auto a = train_boosted(d.x, d.y, c);
  const auto b = train_boosted(d.x, d.y, c);
  for (Eigen::Index r = 0; r < d.x.rows(); ++r) EXPECT_EQ(raw_score(a, d.x.row(r).transpose()), raw_score(b, d.x.row(r).transpose()));
}

TEST(DetectorFile, RoundTripBothKinds) {
  set_log_level(LogLevel::error);
  const auto dir = testing::temp_dir("detector");
  const auto schema = features::FeatureSchema::canonical(1, 1);
  auto d = planted(200, 0.3, 1.5, 6, schema.size());
  d.x.col(4).setConstant(3.0);  // a degenerate column survives the trip
  for (auto kind : {ClassifierKind::logistic, ClassifierKind::boosted}) {
    DetectorTrainConfig c;
    c.kind = kind;
    c.boosted.n_trees = 10;
    const Detector det = train_detector(schema, d.x, d.y, c);
    save_detector(dir / "det.bin", det);
    const Detector back = load_detector(dir / "det.bin");
    EXPECT_EQ(back.kind(), kind);
    EXPECT_EQ(back.schema, schema);
    const Eigen::VectorXd a = det.score_rows(d.x), b = back.score_rows(d.x);
    EXPECT_EQ(a, b);
    for (Eigen::Index r = 0; r < 5; ++r) EXPECT_NEAR(det.score(d.x.row(r).transpose()), a[r], 1e-14);
  }
  EXPECT_THROW(load_detector(dir / "missing.bin"), DataError);
  std::filesystem::remove_all(dir);
  set_log_level(LogLevel::info);
}

TEST(Crossval, PlantedSignalAndReproducible) {
  const auto schema = features::FeatureSchema::canonical(1, 1);
  const auto d = planted(600, 0.2, 3.0, 10, schema.size());
  CrossvalConfig cv;
  cv.seed = 77;
  const auto a = crossval_report(schema, d.x, d.y, {}, cv);
  const auto b = crossval_report(schema, d.x, d.y, {}, cv);
  ASSERT_EQ(a.splits.size(), 10u);
  EXPECT_EQ(report_to_json(a).dump(), report_to_json(b).dump());
  EXPECT_GE(a.mean.auroc, 0.9);
  EXPECT_LE(a.mean.auroc, 1.0);
  for (const auto& s : a.splits) {
    for (double v : {s.acc, s.auroc, s.auprc}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(Crossval, IdenticalExamplesHaveZeroSpread) {
  set_log_level(LogLevel::error);
  const auto schema = features::FeatureSchema::canonical(1, 1);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Constant(40, schema.size(), 1.5);
  std::vector<int> y(40, 0);
  for (int i = 0; i < 10; ++i) y[static_cast<std::size_t>(i)] = 1;
  const auto r = crossval_report(schema, x, y, {}, {});
  EXPECT_EQ(r.stddev.auroc, 0.0);
  EXPECT_EQ(r.stddev.acc, 0.0);
  EXPECT_EQ(r.mean.auroc, 0.5);
  EXPECT_THROW(crossval_report(schema, x, y, {}, {1, 0.2, 0.5, 0}), ConfigError);
  set_log_level(LogLevel::info);
}

}  // namespace
}  // namespace ecd
