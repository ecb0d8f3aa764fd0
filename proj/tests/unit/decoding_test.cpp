// Copyright (C) 2026 The ECD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "ecd/core/error.hpp"
#include "ecd/core/random.hpp"
#include "ecd/decoding/benchmark.hpp"
#include "ecd/decoding/generate.hpp"
#include "ecd/decoding/ops.hpp"
#include "ecd/model/tokenizer.hpp"
#include "test_util.hpp"

namespace ecd {
namespace {

using namespace decoding;

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

// Logistic detector with unit standardization and a single non-zero weight.
detector::Detector single_weight_detector(int n_layers, int n_heads, int feature, double weight, double bias = 0.0) {
  detector::Detector d;
  d.schema = features::FeatureSchema::canonical(n_layers, n_heads);
  const int m = d.schema.size();
  d.standardizer.mean = Eigen::VectorXd::Zero(m);
  d.standardizer.std = Eigen::VectorXd::Ones(m);
  d.standardizer.degenerate.assign(static_cast<std::size_t>(m), false);
  detector::LogisticModel lr;
  lr.weights = Eigen::VectorXd::Zero(m);
  lr.weights[feature] = weight;
  lr.bias = bias;
  d.model = lr;
  return d;
}

struct Fixture {
  model::ModelConfig config = testing::tiny_config();
  model::Model model{testing::random_checkpoint(config, 17, 0.5)};
  detector::Detector detector;
  Fixture() {
    const auto schema = features::FeatureSchema::canonical(config.n_layers, config.n_heads);
    detector = single_weight_detector(config.n_layers, config.n_heads, schema.nll_offset() + config.n_layers - 1, 0.7);
  }
  model::PromptState prompt(std::uint64_t seed) const { return testing::random_state(config, 2, seed); }
};

TEST(Apc, Examples) {
  EXPECT_EQ(apply_apc(vec({0.5, 0.3, 0.2}), 0.5), (std::vector<int>{0, 1}));
  EXPECT_EQ(apply_apc(vec({0.2, 0.5, 0.3}), 1.0), (std::vector<int>{1}));
  EXPECT_EQ(apply_apc(vec({0.4, 0.2, 0.4}), 1.0), (std::vector<int>{0, 2}));
  EXPECT_EQ(apply_apc(vec({0.9, 0.1, 0.0}), 0.0), (std::vector<int>{0, 1, 2}));
}

TEST(Ecd, ReducesToPThetaAtAlphaZero) {
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto p = testing::random_distribution(13, s, 3.0);
    const auto cand = apply_apc(p, 0.0);
    std::vector<double> pf(cand.size());
    Rng rng(s);
    for (auto& v : pf) v = rng.uniform();
    const auto q = apply_ecd(p, pf, 0.0, cand);
    EXPECT_LT((q - p).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Ecd, HandValueAndSupport) {
  const auto p = vec({0.4, 0.4, 0.2});
  const std::vector<int> cand{0, 1};
  const std::vector<double> pf{0.9, 0.1};
  const auto q = apply_ecd(p, pf, 1.0, cand);
  const double expected = (1.0 / 0.1) / (1.0 / 0.1 + 1.0 / 0.9);
  EXPECT_NEAR(q[1], expected, 1e-12);
  EXPECT_NEAR(q[1], 0.9, 1e-12);
  EXPECT_EQ(q[2], 0.0);
  EXPECT_NEAR(q.sum(), 1.0, 1e-12);
  EXPECT_THROW(apply_ecd(p, {}, 1.0, {}), InvariantError);
}

TEST(Ecd, StrictlyDecreasingInScore) {
  const auto p = testing::random_distribution(6, 3);
  const std::vector<int> cand{0, 1, 2, 3, 4, 5};
  std::vector<double> pf{0.2, 0.3, 0.4, 0.5, 0.6, 0.7};
  double prev = 1.0;
  for (double v : {0.01, 0.1, 0.3, 0.6, 0.9, 0.99}) {
    pf[2] = v;
    const double q = apply_ecd(p, pf, 1.0, cand)[2];
    EXPECT_LT(q, prev);
    prev = q;
  }
}

TEST(Contrast, Reductions) {
  const auto p = testing::random_distribution(8, 1);
  const auto c = testing::random_distribution(8, 2);
  const auto all = apply_apc(p, 0.0);
  EXPECT_LT((contrast_distributions(p, c, 0.0, all) - p).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((contrast_distributions(p, p, 2.5, all) - p).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Sampling, GreedyLowestIdOnTies) {
  EXPECT_EQ(greedy_pick(vec({0.1, 0.45, 0.45})), 1);
  EXPECT_EQ(greedy_pick(vec({0.3, 0.3, 0.3, 0.1})), 0);
}

TEST(Sampling, NucleusMinimalSet) {
  const auto p = vec({0.1, 0.5, 0.25, 0.15, 0.0});
  EXPECT_EQ(nucleus_set(p, 0.5), (std::vector<int>{1}));
  EXPECT_EQ(nucleus_set(p, 0.6), (std::vector<int>{1, 2}));
  EXPECT_EQ(nucleus_set(p, 0.9), (std::vector<int>{1, 2, 3}));
  EXPECT_EQ(nucleus_set(p, 1.0), (std::vector<int>{1, 2, 3, 0}));
  Rng rng(4);
  std::set<int> seen;
  for (int k = 0; k < 2000; ++k) {
    const int y = sample_nucleus(p, 0.6, rng);
    EXPECT_TRUE(y == 1 || y == 2);
    seen.insert(sample_nucleus(p, 1.0, rng));
  }
  EXPECT_EQ(seen, (std::set<int>{0, 1, 2, 3}));
}

TEST(Sampling, TemperatureAndSuppression) {
  const auto p = vec({0.5, 0.3, 0.2});
  EXPECT_EQ(apply_temperature(p, 1.0), p);
  const auto sharp = apply_temperature(p, 0.5);
  EXPECT_NEAR(sharp[0], 0.25 / (0.25 + 0.09 + 0.04), 1e-12);
  const auto s = suppress_token(p, 0);
  EXPECT_EQ(s[0], 0.0);
  EXPECT_NEAR(s[1], 0.6, 1e-12);
}

TEST(ScoreCandidates, SingletonAndOrdering) {
  Fixture f;
  const auto trace = model::forward_step(f.model, f.prompt(1));
  features::GenerationHistory h;
  const std::vector<int> one{3};
  EXPECT_EQ(score_candidates(trace, h, f.detector, one).size(), 1);
  std::vector<int> all(static_cast<std::size_t>(f.config.vocab_size));
  std::iota(all.begin(), all.end(), 0);
  const auto pf = score_candidates(trace, h, f.detector, all);
  for (int a : all) {
    for (int b : all) {
      if (trace.final_dist[a] < trace.final_dist[b]) {
        EXPECT_GT(pf[a], pf[b]);
      }
    }
  }
  const std::vector<int> twice{5, 5};
  const auto dup = score_candidates(trace, h, f.detector, twice);
  EXPECT_EQ(dup[0], dup[1]);
  const auto wrong = single_weight_detector(f.config.n_layers + 1, f.config.n_heads, 0, 1.0);
  EXPECT_THROW(score_candidates(trace, h, wrong, one), DataError);
}

TEST(Generate, GreedyIgnoresSeed) {
  Fixture f;
  DecodeConfig c;
  c.strategy = Strategy::greedy;
  c.max_length = 12;
  c.seed = 1;
  const auto a = generate(f.model, nullptr, f.prompt(2), c);
  c.seed = 999;
  const auto b = generate(f.model, nullptr, f.prompt(2), c);
  EXPECT_EQ(a.tokens, b.tokens);
  EXPECT_LE(a.steps.size(), 12u);
}

TEST(Generate, EcdBetaOneIsGreedy) {
  Fixture f;
  for (std::uint64_t s = 0; s < 4; ++s) {
    DecodeConfig greedy;
    greedy.strategy = Strategy::greedy;
    greedy.max_length = 10;
    DecodeConfig ecd = greedy;
    ecd.strategy = Strategy::nucleus;
    ecd.mode = DecodeMode::ecd;
    ecd.beta = 1.0;
    ecd.seed = s;
    const auto a = generate(f.model, nullptr, f.prompt(s), greedy);
    const auto b = generate(f.model, &f.detector, f.prompt(s), ecd);
    EXPECT_EQ(a.tokens, b.tokens);
    for (const auto& st : b.steps) EXPECT_EQ(st.candidates.size(), 1u);
  }
}

TEST(Generate, EcdAlphaZeroBetaZeroMatchesNucleus) {
  Fixture f;
  for (std::uint64_t s = 0; s < 6; ++s) {
    DecodeConfig reg;
    reg.max_length = 15;
    reg.seed = 100 + s;
    reg.top_p = 0.95;
    DecodeConfig ecd = reg;
    ecd.mode = DecodeMode::ecd;
    ecd.alpha = 0.0;
    ecd.beta = 0.0;
    const auto a = generate(f.model, nullptr, f.prompt(s), reg);
    const auto b = generate(f.model, &f.detector, f.prompt(s), ecd);
    EXPECT_EQ(a.tokens, b.tokens);
  }
}

TEST(Generate, CountersAndInvariants) {
  Fixture f;
  DecodeConfig c;
  c.max_length = 9;
  c.min_length = 3;
  c.record_distributions = true;
  for (DecodeMode mode : {DecodeMode::regular, DecodeMode::ecd, DecodeMode::dual_pass_baseline}) {
    c.mode = mode;
    const auto r = generate(f.model, &f.detector, f.prompt(7), c);
    const int steps = static_cast<int>(r.steps.size());
    EXPECT_LE(steps, c.max_length);
    EXPECT_EQ(r.forward_count, (mode == DecodeMode::dual_pass_baseline ? 2 : 1) * steps);
    int calls = 0;
    for (std::size_t k = 0; k < r.steps.size(); ++k) {
      const auto& s = r.steps[k];
      calls += static_cast<int>(mode == DecodeMode::ecd ? s.candidates.size() : 0);
      double sum = 0.0;
      for (double v : s.final_dist) sum += v;
      EXPECT_NEAR(sum, 1.0, 1e-9);
      if (mode != DecodeMode::regular) {
        EXPECT_TRUE(std::find(s.candidates.begin(), s.candidates.end(), s.token) != s.candidates.end());
        std::set<int> cand(s.candidates.begin(), s.candidates.end());
        for (std::size_t y = 0; y < s.final_dist.size(); ++y) {
          if (!cand.count(static_cast<int>(y))) {
            EXPECT_EQ(s.final_dist[y], 0.0);
          }
        }
      }
      if (static_cast<int>(k) < c.min_length) {
        EXPECT_NE(s.token, model::kEosId);
      }
    }
    EXPECT_EQ(r.classifier_calls, calls);
  }
}

TEST(Generate, ReplayableAndSerializable) {
  Fixture f;
  DecodeConfig c;
  c.mode = DecodeMode::ecd;
  c.max_length = 8;
  c.seed = 5;
  const auto a = generate(f.model, &f.detector, f.prompt(3), c);
  const auto b = generate(f.model, &f.detector, f.prompt(3), c);
  EXPECT_EQ(a.tokens, b.tokens);
  const auto back = record_from_json(to_json(a));
  EXPECT_EQ(back.tokens, a.tokens);
  EXPECT_EQ(back.config.seed, 5u);
  EXPECT_EQ(back.steps.size(), a.steps.size());
  const auto replay = generate(f.model, &f.detector, model::PromptState{back.visual_prefix_ids, back.query_ids, {}, {}},
                               back.config);
  EXPECT_EQ(replay.tokens, a.tokens);
}

TEST(Generate, Errors) {
  Fixture f;
  DecodeConfig c;
  c.mode = DecodeMode::ecd;
  EXPECT_THROW(generate(f.model, nullptr, f.prompt(1), c), ConfigError);
  c.mode = DecodeMode::regular;
  auto long_prompt = f.prompt(1);
  long_prompt.query_ids.assign(static_cast<std::size_t>(f.config.max_seq_len), 4);
  EXPECT_THROW(generate(f.model, nullptr, long_prompt, c), ConfigError);
  c.min_length = 300;
  EXPECT_THROW(generate(f.model, nullptr, f.prompt(1), c), ConfigError);
}

TEST(Generate, StopsAtContextLimit) {
  Fixture f;
  DecodeConfig c;
  c.min_length = 256;
  c.max_length = 256;
  const auto r = generate(f.model, nullptr, f.prompt(1), c);
  EXPECT_EQ(r.stop_reason, "context");
  EXPECT_EQ(static_cast<int>(r.tokens.size()) + f.prompt(1).length(), f.config.max_seq_len + 1);
}

TEST(DualPass, Reductions) {
  Fixture f;
  const auto state = f.prompt(4);
  const auto noisy = model::distort_visual_prefix(state, 3);
  const auto original = model::forward_step(f.model, state).final_dist;
  EXPECT_LT((dual_pass_baseline_step(f.model, state, noisy, 0.0) - original).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((dual_pass_baseline_step(f.model, state, state, 3.0) - original).cwiseAbs().maxCoeff(), 1e-12);
  const auto q = dual_pass_baseline_step(f.model, state, noisy, 1.0, 0.1);
  EXPECT_NEAR(q.sum(), 1.0, 1e-12);
}

TEST(Benchmark, ReportsAllModes) {
  Fixture f;
  std::vector<model::PromptState> prompts;
  for (std::uint64_t s = 0; s < 10; ++s) prompts.push_back(f.prompt(s));
  DecodeConfig c;
  c.max_length = 5;
  const auto r = benchmark_latency(f.model, &f.detector, prompts, c);
  ASSERT_EQ(r.modes.size(), 3u);
  EXPECT_DOUBLE_EQ(r.find(DecodeMode::regular)->forwards_per_step, 1.0);
  EXPECT_DOUBLE_EQ(r.find(DecodeMode::ecd)->forwards_per_step, 1.0);
  EXPECT_DOUBLE_EQ(r.find(DecodeMode::dual_pass_baseline)->forwards_per_step, 2.0);
  EXPECT_EQ(r.find(DecodeMode::regular)->mean_classifier_ns, 0.0);
  EXPECT_NE(format_report(r).find("dual_pass"), std::string::npos);
  prompts.pop_back();
  EXPECT_THROW(benchmark_latency(f.model, &f.detector, prompts, c), ConfigError);
}

}  // namespace
}  // namespace ecd
