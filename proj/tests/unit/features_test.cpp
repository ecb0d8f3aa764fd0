// Copyright (C) 2026 The ECD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "ecd/core/error.hpp"
#include "ecd/core/random.hpp"
#include "ecd/features/dump.hpp"
#include "ecd/features/features.hpp"
#include "ecd/features/standardizer.hpp"
#include "ecd/model/transformer.hpp"
#include "test_util.hpp"

namespace ecd {
namespace {

using features::FeatureSchema;
using features::GenerationHistory;
using model::ForwardTrace;

// Hand-built trace: every early exit equal to `dist`, attention filled with `att`.
ForwardTrace flat_trace(int n_layers, int n_heads, int n_visual, int length, const Eigen::VectorXd& dist,
                        double att) {
  ForwardTrace t;
  t.n_visual = n_visual;
  for (int i = 0; i < n_layers; ++i) {
    t.attention.push_back(Eigen::MatrixXd::Constant(n_heads, length, att));
    t.early_exit.push_back(dist);
    t.hidden_states.push_back(Eigen::VectorXd::Zero(2));
  }
  t.hidden_states.push_back(Eigen::VectorXd::Zero(2));
  t.final_dist = dist;
  return t;
}

Eigen::VectorXd uniform(int v) { return Eigen::VectorXd::Constant(v, 1.0 / v); }

TEST(Schema, DimensionForTwoLayersTwoHeads) {
  const auto s = FeatureSchema::canonical(2, 2);
  EXPECT_EQ(s.size(), 19);
  EXPECT_EQ(features::feature_dimension(2, 2), 19);
  EXPECT_EQ(features::feature_dimension(4, 4), 14 + 4 + 3 + 4 + 4);
}

TEST(Schema, NamesUniqueAndOffsetsConsistent) {
  for (int n = 1; n <= 5; ++n) {
    for (int g = 1; g <= 4; ++g) {
      const auto s = FeatureSchema::canonical(n, g);
      std::set<std::string> unique(s.names.begin(), s.names.end());
      EXPECT_EQ(unique.size(), s.names.size());
      EXPECT_EQ(s.size(), features::feature_dimension(n, g));
      EXPECT_EQ(s.index_of("nll_l1"), s.nll_offset());
      EXPECT_EQ(s.index_of("head_entropy_l1"), s.head_entropy_offset());
      EXPECT_EQ(s.head_entropy_offset() + n, s.size());
      EXPECT_EQ(s.index_of("missing"), -1);
    }
  }
}

TEST(Schema, JsonRoundTripAndHash) {
  const auto s = FeatureSchema::canonical(3, 2);
  const auto back = nlohmann::json(s).get<FeatureSchema>();
  EXPECT_EQ(back, s);
  auto permuted = s;
  std::swap(permuted.names[0], permuted.names[1]);
  EXPECT_NE(permuted.hash(), s.hash());
  nlohmann::json j = s;
  j["names"] = permuted.names;
  EXPECT_THROW(j.get<FeatureSchema>(), DataError);
}

TEST(Nll, HandValues) {
  Eigen::VectorXd p(4);
  p << 0.25, 0.25, 0.5, 0.0;
  auto t = flat_trace(3, 1, 1, 4, p, 0.25);
  const auto b = features::nll_per_layer(t, 0);
  ASSERT_EQ(b.size(), 3u);
  EXPECT_NEAR(b[2], std::log(4.0), 1e-12);
  // Zero probability clamps to a finite value.
  const auto z = features::nll_per_layer(t, 3);
  EXPECT_NEAR(z[0], -std::log(1e-12), 1e-9);
  Eigen::VectorXd one = Eigen::VectorXd::Zero(4);
  one[1] = 1.0;
  t = flat_trace(3, 1, 1, 4, one, 0.25);
  for (double v : features::nll_per_layer(t, 1)) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(features::nll_per_layer(t, 4), ConfigError);
  EXPECT_THROW(features::nll_per_layer(t, -1), ConfigError);
}

TEST(Kl, PointwiseHandValue) {
  Eigen::VectorXd last(2), first(2);
  last << 0.5, 0.5;
  first << 0.25, 0.75;
  auto t = flat_trace(2, 1, 1, 3, last, 0.3);
  t.early_exit[0] = first;
  const auto k = features::kl_per_layer(t, 0);
  ASSERT_EQ(k.size(), 1u);
  EXPECT_NEAR(k[0], 0.5 * std::log(2.0), 1e-12);
  EXPECT_NEAR(k[0], 0.3466, 1e-4);
}

TEST(Kl, ZeroWhenLayersAgree) {
  const auto p = testing::random_distribution(9, 4);
  const auto t = flat_trace(4, 2, 2, 5, p, 0.1);
  for (int y = 0; y < 9; ++y) {
    for (double v : features::kl_per_layer(t, y)) EXPECT_EQ(v, 0.0);
  }
}

TEST(Kl, FullVariantMatchesDirectSum) {
  const auto last = testing::random_distribution(7, 1);
  const auto mid = testing::random_distribution(7, 2);
  auto t = flat_trace(2, 1, 1, 3, last, 0.3);
  t.early_exit[0] = mid;
  double kl = 0.0;
  for (int y = 0; y < 7; ++y) kl += last[y] * std::log(last[y] / mid[y]);
  EXPECT_NEAR(features::kl_per_layer(t, 3, true)[0], kl, 1e-12);
  EXPECT_GE(kl, 0.0);
}

TEST(AttentionEntropy, OverLayersHandValue) {
  auto t = flat_trace(2, 1, 1, 4, uniform(3), 0.0);
  t.attention[0](0, 0) = 0.5;
  t.attention[1](0, 0) = 0.25;
  const auto e = features::attn_entropy_over_layers(t);
  ASSERT_EQ(e.size(), 1u);
  const double expected = -0.5 * (0.5 * std::log(0.5) + 0.25 * std::log(0.25));
  EXPECT_NEAR(e[0], expected, 1e-12);
  EXPECT_NEAR(e[0], 0.3466, 1e-4);
}

TEST(AttentionEntropy, OverHeadsSingleHeadHalf) {
  const auto t = flat_trace(3, 1, 2, 4, uniform(3), 0.5);
  for (double v : features::attn_entropy_over_heads(t)) EXPECT_NEAR(v, -0.5 * std::log(0.5), 1e-12);
}

TEST(AttentionEntropy, DegenerateAttention) {
  for (double a : {0.0, 1.0}) {
    const auto t = flat_trace(2, 3, 2, 4, uniform(3), a);
    for (double v : features::attn_entropy_over_layers(t)) EXPECT_EQ(v, 0.0);
    for (double v : features::attn_entropy_over_heads(t)) EXPECT_EQ(v, 0.0);
  }
  auto t = flat_trace(2, 3, 0, 4, uniform(3), 0.2);
  EXPECT_THROW(features::attn_entropy_over_layers(t), ConfigError);
  EXPECT_THROW(features::attn_entropy_over_heads(t), ConfigError);
}

TEST(AttentionEntropy, SymmetricTraceAgrees) {
  const auto t = flat_trace(3, 2, 2, 5, uniform(3), 0.2);
  const auto layers = features::attn_entropy_over_layers(t);
  const auto heads = features::attn_entropy_over_heads(t);
  EXPECT_EQ(layers.size(), 2u);
  EXPECT_EQ(heads.size(), 3u);
  for (double v : heads) EXPECT_NEAR(v, layers[0], 1e-15);
}

TEST(Baseline, PointMass) {
  Eigen::VectorXd p = Eigen::VectorXd::Zero(5);
  p[2] = 1.0;
  const auto t = flat_trace(2, 2, 2, 4, p, 0.25);
  GenerationHistory h;
  const auto b = features::baseline_features(h, t, 2);
  ASSERT_EQ(b.size(), 12u);
  const int g = 2;
  EXPECT_EQ(b[g + 7], 0.0);  // R
  EXPECT_EQ(b[g + 8], 0.0);  // M
  EXPECT_EQ(b[g + 9], 0.0);  // D
  EXPECT_EQ(b[g + 6], 0.0);  // E
}

TEST(Baseline, UniformDistribution) {
  const int v = 8;
  const auto t = flat_trace(2, 2, 2, 4, uniform(v), 0.25);
  GenerationHistory h;
  const auto b = features::baseline_features(h, t, 0);
  const int g = 2;
  EXPECT_NEAR(b[g + 6], 1.0, 1e-12);
  EXPECT_NEAR(b[g + 7], 1.0 - 1.0 / v, 1e-12);
  EXPECT_NEAR(b[g + 5], 0.0, 1e-20);  // every log-prob equals the mean
  EXPECT_NEAR(b[2], 0.25, 1e-12);     // mean attention per head
}

TEST(Baseline, FirstStepScores) {
  Eigen::VectorXd p(2);
  p << std::exp(-0.5), 1.0 - std::exp(-0.5);
  const auto t = flat_trace(2, 1, 1, 3, p, 0.5);
  GenerationHistory h;
  const auto b = features::baseline_features(h, t, 0, 1.0);
  EXPECT_EQ(b[0], 1.0);  // P
  EXPECT_EQ(b[1], 1.0);  // N counts the current token
  EXPECT_NEAR(b[3], -0.5, 1e-12);  // L
  EXPECT_NEAR(b[4], -0.5, 1e-12);  // C
  EXPECT_NEAR(b[5], -0.5, 1e-12);  // S
}

TEST(Baseline, HistoryDrivenValuesMatchOracle) {
  const int v = 6;
  const auto p = testing::random_distribution(v, 11);
  const auto t = flat_trace(2, 2, 3, 6, p, 0.1);
  GenerationHistory h;
  h.push(4, -1.0);
  h.push(2, -0.3);
  h.push(4, -0.7);
  const double lp = 2.0;
  const auto b = features::baseline_features(h, t, 4, lp);
  const int g = 2;
  EXPECT_EQ(b[0], 4.0);
  EXPECT_EQ(b[1], 3.0);
  const double l = std::log(p[4]);
  EXPECT_NEAR(b[g + 2], l, 1e-12);
  EXPECT_NEAR(b[g + 3], -2.0 + l, 1e-12);
  EXPECT_NEAR(b[g + 4], (-2.0 + l) / 16.0, 1e-12);

  // Vocabulary-wide quantities recomputed naively.
  double mu = 0.0;
  for (int y = 0; y < v; ++y) mu += std::log(p[y]) / v;
  double var = 0.0, ent = 0.0;
  for (int y = 0; y < v; ++y) {
    var += (std::log(p[y]) - mu) * (std::log(p[y]) - mu) / v;
    ent -= p[y] * std::log(p[y]);
  }
  std::vector<double> sorted(p.data(), p.data() + v);
  std::sort(sorted.rbegin(), sorted.rend());
  EXPECT_NEAR(b[g + 5], var, 1e-10);
  EXPECT_NEAR(b[g + 6], ent / std::log(v), 1e-12);
  EXPECT_NEAR(b[g + 7], 1.0 - sorted[0], 1e-12);
  EXPECT_NEAR(b[g + 8], 1.0 - sorted[0] + sorted[1], 1e-12);
  EXPECT_NEAR(b[g + 9], std::log(sorted[0]) - l, 1e-12);
}

TEST(Assemble, LengthFiniteAndNllMatchesLogProb) {
  const auto config = testing::tiny_config();
  const auto ckpt = testing::random_checkpoint(config, 5);
  const model::Model m(ckpt);
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto state = testing::random_state(config, 3, s);
    const auto trace = model::forward_step(m, state);
    const auto schema = FeatureSchema::canonical(config.n_layers, config.n_heads);
    GenerationHistory h;
    h.push(5, -1.2);
    for (int y = 0; y < config.vocab_size; ++y) {
      const auto fv = features::assemble_features(schema, trace, h, y);
      ASSERT_EQ(static_cast<int>(fv.values.size()), schema.size());
      for (double v : fv.values) ASSERT_TRUE(std::isfinite(v));
      const double bn = fv.values[schema.nll_offset() + config.n_layers - 1];
      EXPECT_DOUBLE_EQ(bn, -fv.values[schema.index_of("log_prob")]);
      const double e = fv.values[schema.index_of("entropy")];
      EXPECT_GE(e, 0.0);
      EXPECT_LE(e, 1.0 + 1e-12);
      for (int k = schema.layer_entropy_offset(); k < schema.size(); ++k) EXPECT_GE(fv.values[k], 0.0);
    }
  }
}

TEST(Assemble, ConcatenatesFamiliesInOrder) {
  const auto config = testing::tiny_config();
  const model::Model m(testing::random_checkpoint(config, 8));
  const auto trace = model::forward_step(m, testing::random_state(config, 2, 9));
  const auto schema = FeatureSchema::canonical(config.n_layers, config.n_heads);
  GenerationHistory h;
  const int y = 6;
  const auto fv = features::assemble_features(schema, trace, h, y);
  std::vector<double> expected = features::baseline_features(h, trace, y);
  for (auto part : {features::nll_per_layer(trace, y), features::kl_per_layer(trace, y),
                    features::attn_entropy_over_layers(trace), features::attn_entropy_over_heads(trace)}) {
    expected.insert(expected.end(), part.begin(), part.end());
  }
  ASSERT_EQ(expected.size(), fv.values.size());
  for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_DOUBLE_EQ(fv.values[i], expected[i]) << i;
}

TEST(Assemble, PermutedSchemaRejected) {
  const auto config = testing::tiny_config();
  const model::Model m(testing::random_checkpoint(config, 8));
  const auto trace = model::forward_step(m, testing::random_state(config, 2, 9));
  auto schema = FeatureSchema::canonical(config.n_layers, config.n_heads);
  std::swap(schema.names[3], schema.names[4]);
  EXPECT_THROW(features::assemble_features(schema, trace, {}, 1), DataError);
  const auto wrong = FeatureSchema::canonical(config.n_layers + 1, config.n_heads);
  EXPECT_THROW(features::assemble_features(wrong, trace, {}, 1), DataError);
}

TEST(Assemble, StepRowsMatchSingleCalls) {
  const auto config = testing::tiny_config();
  const model::Model m(testing::random_checkpoint(config, 12));
  const auto trace = model::forward_step(m, testing::random_state(config, 4, 1));
  const auto schema = FeatureSchema::canonical(config.n_layers, config.n_heads);
  GenerationHistory h;
  h.push(4, -0.1);
  features::FeatureOptions opt;
  opt.full_kl = true;
  const features::StepFeatures step(schema, trace, h, opt);
  const std::vector<int> tokens{0, 4, 7};
  const Eigen::MatrixXd rows = step.rows(tokens);
  for (std::size_t r = 0; r < tokens.size(); ++r) {
    const auto fv = features::assemble_features(schema, trace, h, tokens[r], opt);
    for (int c = 0; c < schema.size(); ++c) EXPECT_EQ(rows(static_cast<Eigen::Index>(r), c), fv.values[c]);
  }
}

TEST(Standardizer, AlreadyStandard) {
  Eigen::MatrixXd x(2, 1);
  x << -1.0, 1.0;
  const auto s = features::fit_standardizer(x);
  EXPECT_DOUBLE_EQ(s.mean[0], 0.0);
  EXPECT_DOUBLE_EQ(s.std[0], 1.0);
  Eigen::VectorXd v(1);
  v << 1.0;
  EXPECT_DOUBLE_EQ(features::apply_standardizer(s, v)[0], 1.0);
}

TEST(Standardizer, ConstantDimensionMapsToZero) {
  Eigen::MatrixXd x(3, 2);
  x << 1.0, 5.0, 2.0, 5.0, 3.0, 5.0;
  const auto s = features::fit_standardizer(x);
  EXPECT_TRUE(s.degenerate[1]);
  EXPECT_FALSE(s.degenerate[0]);
  EXPECT_GE(s.std.minCoeff(), 1e-8);
  features::apply_standardizer_rows(s, x);
  EXPECT_TRUE(x.col(1).isZero());
  Eigen::VectorXd v(2);
  v << 2.0, 17.0;
  EXPECT_EQ(features::apply_standardizer(s, v)[1], 0.0);
}

TEST(Standardizer, RandomMatrixMoments) {
  Rng rng(21);
  Eigen::MatrixXd x(100, 19);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) x(r, c) = 3.0 * c + (c + 1) * rng.normal();
  }
  const auto s = features::fit_standardizer(x);
  features::apply_standardizer_rows(s, x);
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    double mean = 0.0, var = 0.0;
    for (Eigen::Index r = 0; r < x.rows(); ++r) mean += x(r, c) / 100.0;
    for (Eigen::Index r = 0; r < x.rows(); ++r) var += (x(r, c) - mean) * (x(r, c) - mean) / 100.0;
    EXPECT_LT(std::abs(mean), 1e-6);
    EXPECT_NEAR(std::sqrt(var), 1.0, 1e-6);
  }
}

TEST(Standardizer, ApplyUnapplyRoundTrip) {
  Rng rng(4);
  Eigen::MatrixXd x(30, 5);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = 100.0 * rng.normal() + 7.0;
  const auto s = features::fit_standardizer(x);
  for (int k = 0; k < 20; ++k) {
    Eigen::VectorXd v(5);
    for (auto& e : v) e = 50.0 * rng.normal();
    const Eigen::VectorXd back = features::unapply_standardizer(s, features::apply_standardizer(s, v));
    EXPECT_LT((back - v).cwiseAbs().maxCoeff(), 1e-9);
  }
  EXPECT_THROW(features::fit_standardizer(x.topRows(1)), DataError);
  EXPECT_THROW(features::apply_standardizer(s, Eigen::VectorXd::Zero(4)), DataError);
  const auto j = nlohmann::json(s).get<features::StandardizationStats>();
  EXPECT_EQ(j.mean, s.mean);
  EXPECT_EQ(j.std, s.std);
}

TEST(Dump, RoundTripAndValidation) {
  const auto dir = testing::temp_dir("dump");
  std::vector<features::FeatureRecord> recs(3);
  for (int i = 0; i < 3; ++i) {
    recs[i].step = i + 1;
    recs[i].token_id = 10 + i;
    recs[i].label = i % 2;
    recs[i].values = {0.1 * i, 1.0 / 3.0, -2.5e-17};
  }
  write_feature_dump(dir / "f.jsonl", recs);
  const auto back = features::read_feature_dump(dir / "f.jsonl", true, 3);
  ASSERT_EQ(back.size(), 3u);
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(back[i].values, recs[i].values);
    EXPECT_EQ(back[i].label, recs[i].label);
  }
  EXPECT_THROW(features::read_feature_dump(dir / "f.jsonl", true, 4), DataError);
  recs[1].label.reset();
  write_feature_dump(dir / "g.jsonl", recs);
  EXPECT_NO_THROW(features::read_feature_dump(dir / "g.jsonl", false));
  EXPECT_THROW(features::read_feature_dump(dir / "g.jsonl", true), DataError);
  std::ofstream(dir / "bad.jsonl") << "{\"step\": 1, \n";
  EXPECT_THROW(features::read_feature_dump(dir / "bad.jsonl", false), ParseError);

  const auto schema = FeatureSchema::canonical(4, 4);
  features::write_schema(dir / "schema.json", schema);
  EXPECT_EQ(features::read_schema(dir / "schema.json"), schema);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace ecd
