// Copyright (C) 2026 The ECD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "ecd/core/error.hpp"
#include "ecd/core/random.hpp"
#include "ecd/model/checkpoint.hpp"
#include "ecd/model/tokenizer.hpp"
#include "ecd/model/trainer.hpp"
#include "ecd/model/transformer.hpp"
#include "unit/test_util.hpp"

namespace ecd::model {
namespace {

using ecd::testing::random_checkpoint;
using ecd::testing::random_state;
using ecd::testing::temp_dir;
using ecd::testing::tiny_config;

// Dense-math evaluation of softmax(W^T LN(h)) straight from checkpoint floats.
Eigen::VectorXd head_oracle(const Checkpoint& cp, const Eigen::VectorXd& h) {
  const int d = cp.config.d_model;
  const int v = cp.config.vocab_size;
  const auto& gain = cp.at("final_norm.gain").values;
  const auto& bias = cp.at("final_norm.bias").values;
  const auto& w = cp.at("head.weight").values;
  double mean = 0;
  for (int k = 0; k < d; ++k) mean += h[k];
  mean /= d;
  double var = 0;
  for (int k = 0; k < d; ++k) var += (h[k] - mean) * (h[k] - mean);
  var /= d;
  std::vector<double> normed(static_cast<std::size_t>(d));
  for (int k = 0; k < d; ++k) normed[k] = (h[k] - mean) / std::sqrt(var + 1e-5) * gain[k] + bias[k];
  std::vector<double> logits(static_cast<std::size_t>(v), 0.0);
  for (int j = 0; j < v; ++j) {
    for (int k = 0; k < d; ++k) logits[j] += normed[k] * w[static_cast<std::size_t>(k * v + j)];
  }
  double peak = logits[0];
  for (double l : logits) peak = std::max(peak, l);
  Eigen::VectorXd p(v);
  double z = 0;
  for (int j = 0; j < v; ++j) z += (p[j] = std::exp(logits[j] - peak));
  return p / z;
}

TEST(ModelConfig, RejectsHeadsNotDividingWidth) {
  ModelConfig c = tiny_config();
  c.d_model = 10;
  c.n_heads = 4;
  try {
    init_model(c);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_STREQ(e.what(), "d_model not divisible by n_heads");
  }
}

TEST(ModelConfig, RejectsOversizedVisualPrefix) {
  ModelConfig c = tiny_config();
  c.n_visual_tokens = c.max_seq_len - 1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny_config();
  c.vocab_size = 3;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(InitModel, DeterministicForEqualConfig) {
  ModelConfig c = tiny_config(7);
  EXPECT_EQ(init_model(c), init_model(c));
  ModelConfig other = c;
  other.seed = 8;
  EXPECT_NE(init_model(c), init_model(other));
}

TEST(InitModel, HeadShapeFollowsConfig) {
  ModelConfig c = tiny_config();
  c.vocab_size = 8;
  c.n_layers = 2;
  c.n_heads = 2;
  c.d_model = 16;
  const Checkpoint cp = init_model(c);
  const Tensor& head = cp.at("head.weight");
  EXPECT_EQ(head.shape, (std::vector<std::int64_t>{16, 8}));
  EXPECT_EQ(head.values.size(), 16u * 8u);
}

TEST(ForwardStep, AttentionRowsAreDistributions) {
  const ModelConfig c = tiny_config();
  const Model model(random_checkpoint(c, 11));
  for (int seed = 0; seed < 20; ++seed) {
    const PromptState s = random_state(c, 1 + seed % 6, static_cast<std::uint64_t>(seed));
    const ForwardTrace t = forward_step(model, s);
    ASSERT_EQ(t.n_layers(), c.n_layers);
    ASSERT_EQ(t.n_heads(), c.n_heads);
    for (const auto& layer : t.attention) {
      ASSERT_EQ(layer.cols(), s.length());
      EXPECT_GE(layer.minCoeff(), 0.0);
      for (int g = 0; g < layer.rows(); ++g) EXPECT_NEAR(layer.row(g).sum(), 1.0, 1e-6);
    }
    for (const auto& p : t.early_exit) {
      EXPECT_GE(p.minCoeff(), 0.0);
      EXPECT_NEAR(p.sum(), 1.0, 1e-9);
    }
  }
}

TEST(ForwardStep, PureAndRepeatable) {
  const ModelConfig c = tiny_config();
  const Checkpoint cp = random_checkpoint(c, 5);
  const PromptState s = random_state(c, 4, 9);
  const ForwardTrace a = forward_step(cp, s);
  const ForwardTrace b = forward_step(cp, s);
  ASSERT_EQ(a.hidden_states.size(), b.hidden_states.size());
  for (std::size_t i = 0; i < a.hidden_states.size(); ++i) EXPECT_EQ(a.hidden_states[i], b.hidden_states[i]);
  for (std::size_t i = 0; i < a.attention.size(); ++i) EXPECT_EQ(a.attention[i], b.attention[i]);
  EXPECT_EQ(a.final_dist, b.final_dist);
}

TEST(ForwardStep, FinalDistMatchesDenseOracle) {
  const ModelConfig c = tiny_config();
  const Checkpoint cp = random_checkpoint(c, 21);
  const ForwardTrace t = forward_step(cp, random_state(c, 5, 2));
  const Eigen::VectorXd expected = head_oracle(cp, t.hidden_states.back());
  EXPECT_LT((t.final_dist - expected).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(ForwardStep, RejectsEmptyAndOverlongStates) {
  ModelConfig c = tiny_config();
  c.n_visual_tokens = 0;
  const Model model(init_model(c));
  EXPECT_THROW(forward_step(model, PromptState{}), ConfigError);
  PromptState long_state;
  long_state.query_ids.assign(static_cast<std::size_t>(c.max_seq_len + 1), kBosId);
  EXPECT_THROW(forward_step(model, long_state), ConfigError);
}

TEST(EarlyExit, LastLayerEqualsFinalDist) {
  const ModelConfig c = tiny_config();
  const Model model(random_checkpoint(c, 4));
  const ForwardTrace t = forward_step(model, random_state(c, 3, 4));
  EXPECT_EQ(early_exit_distribution(model, t, c.n_layers), t.final_dist);
  for (int i = 1; i <= c.n_layers; ++i) {
    const Eigen::VectorXd p = early_exit_distribution(model, t, i);
    EXPECT_GE(p.minCoeff(), 0.0);
    EXPECT_NEAR(p.sum(), 1.0, 1e-9);
  }
  EXPECT_THROW(early_exit_distribution(model, t, 0), ConfigError);
  EXPECT_THROW(early_exit_distribution(model, t, c.n_layers + 1), ConfigError);
}

TEST(EarlyExit, FirstLayerMatchesDenseOracle) {
  const ModelConfig c = tiny_config();
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Checkpoint cp = random_checkpoint(c, 100 + seed);
    const Model model(cp);
    const ForwardTrace t = forward_step(model, random_state(c, 4, seed));
    const Eigen::VectorXd expected = head_oracle(cp, t.hidden_states[1]);
    EXPECT_LT((early_exit_distribution(model, t, 1) - expected).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(ForwardSession, IncrementalMatchesFullRecompute) {
  const ModelConfig c = tiny_config();
  const Model model(random_checkpoint(c, 8));
  PromptState s = random_state(c, 2, 3);
  ForwardSession<float> session(model, s);
  for (int tok : {4, 7, 2, 9}) {
    session.append(tok);
    s.generated_ids.push_back(tok);
    const ForwardTrace full = forward_step(model, s);
    EXPECT_LT((session.trace().final_dist - full.final_dist).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_EQ(session.trace().attention.back().cols(), s.length());
  }
  EXPECT_EQ(session.forward_count(), 5);
}

TEST(ForwardSession, CausalAndVisualPrefixAttendable) {
  const ModelConfig c = tiny_config();
  const Model model(random_checkpoint(c, 8));
  PromptState s = random_state(c, 3, 1);
  const ForwardTrace before = forward_step(model, s);
  // The trace of a prefix is untouched by tokens that come later.
  PromptState longer = s;
  longer.generated_ids = {5, 6};
  ForwardSession<float> session(model, s);
  EXPECT_EQ(session.trace().final_dist, before.final_dist);
  for (const auto& layer : before.attention) {
    EXPECT_GT(layer.leftCols(c.n_visual_tokens).minCoeff(), 0.0);
  }
  // The training forward's attention sees no future tokens: last-position
  // logits of a prefix equal those computed inside a longer sequence.
  const Transformer<double> dmodel(random_checkpoint(c, 8));
  TrainingExample prefix{s.visual_prefix_ids, s.query_ids, 1};
  const RowVector<double> a = training_forward_last_logits(dmodel, prefix);
  ForwardSession<double> dsession(dmodel, s);
  const RowVector<double> b =
      dmodel.head_logits(dsession.trace().hidden_states.back().transpose());
  EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(ForwardSession, NoisePrefixChangesOutputDeterministically) {
  const ModelConfig c = tiny_config();
  const Model model(random_checkpoint(c, 8));
  const PromptState s = random_state(c, 3, 1);
  const PromptState noisy = distort_visual_prefix(s, 17);
  const ForwardTrace a = forward_step(model, noisy);
  const ForwardTrace b = forward_step(model, noisy);
  EXPECT_EQ(a.final_dist, b.final_dist);
  EXPECT_GT((a.final_dist - forward_step(model, s).final_dist).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Checkpoint, SaveLoadRoundTripIsBitIdentical) {
  const auto dir = temp_dir("ckpt");
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Checkpoint cp = random_checkpoint(tiny_config(seed), seed);
    save_checkpoint(cp, dir / "model.ckpt");
    const Checkpoint back = load_checkpoint(dir / "model.ckpt");
    EXPECT_EQ(back, cp);
    EXPECT_EQ(serialize_checkpoint(back), serialize_checkpoint(cp));
  }
}

TEST(Checkpoint, TruncatedFileIsParseError) {
  const std::string bytes = serialize_checkpoint(init_model(tiny_config()));
  const std::size_t end = bytes.find("\nend\n");
  ASSERT_NE(end, std::string::npos);
  EXPECT_THROW(parse_checkpoint(bytes.substr(0, end / 2)), ParseError);
  EXPECT_THROW(parse_checkpoint(""), ParseError);
  EXPECT_THROW(parse_checkpoint("garbage\n"), ParseError);
}

TEST(Checkpoint, ShortPayloadNamesTensor) {
  // A file that declares 100 floats but carries 99.
  std::string bytes = "ECD-CHECKPOINT v1\nmeta {}\ntensors 1\nodd f32 1 100 0 100\nend\n";
  bytes.append(99 * 4, '\0');
  try {
    parse_checkpoint(bytes);
    FAIL() << "expected DataError";
  } catch (const ParseError&) {
    FAIL() << "should be a length mismatch, not a parse error";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("'odd'"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("100"), std::string::npos) << e.what();
  }
}

TEST(Checkpoint, ShapeMismatchAgainstConfigIsRejected) {
  Checkpoint cp = init_model(tiny_config());
  cp.at("head.weight").shape = {1, static_cast<std::int64_t>(cp.at("head.weight").values.size())};
  const auto dir = temp_dir("ckpt_shape");
  save_checkpoint(cp, dir / "bad.ckpt");
  EXPECT_THROW(load_checkpoint(dir / "bad.ckpt"), DataError);
}

TEST(Trainer, GradientMatchesFiniteDifferences) {
  const ModelConfig c = tiny_config();
  Transformer<double> model(random_checkpoint(c, 31, 0.4));
  TrainingExample ex{{1, 4, 0}, {kBosId, 5, 6, 7, 8, kEosId}, 2};

  Params<double> grad = Params<double>::zeros(c);
  loss_and_gradient<double>(model, ex, &grad);

  std::vector<std::pair<double*, const double*>> entries;
  std::vector<std::string> names;
  std::vector<Eigen::Index> sizes;
  model.mutable_params().for_each([&](const std::string& name, double* data, Eigen::Index size) {
    entries.emplace_back(data, nullptr);
    names.push_back(name);
    sizes.push_back(size);
  });
  std::size_t k = 0;
  grad.for_each([&](const std::string&, const double* data, Eigen::Index) { entries[k++].second = data; });

  Rng rng(5);
  const double h = 1e-6;
  int checked = 0;
  for (std::size_t t = 0; t < entries.size(); ++t) {
    for (int draw = 0; draw < 3; ++draw) {
      const auto i = static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::size_t>(sizes[t])));
      double& w = entries[t].first[i];
      const double saved = w;
      w = saved + h;
      const double up = loss_and_gradient<double>(model, ex, nullptr);
      w = saved - h;
      const double down = loss_and_gradient<double>(model, ex, nullptr);
      w = saved;
      const double numeric = (up - down) / (2 * h);
      const double analytic = entries[t].second[i];
      EXPECT_NEAR(analytic, numeric, 1e-6 + 1e-5 * std::abs(numeric)) << names[t] << "[" << i << "]";
      ++checked;
    }
  }
  EXPECT_GT(checked, 50);
}

TEST(Trainer, FitsTinySequenceDeterministically) {
  ModelConfig c = tiny_config(2);
  const Checkpoint init = init_model(c);
  std::vector<TrainingExample> data = {
      {{1, 2, 3}, {kBosId, 4, 5, 6, kEosId}, 2},
      {{3, 2, 1}, {kBosId, 4, 7, 8, kEosId}, 2},
  };
  TrainConfig tc;
  tc.steps = 150;
  tc.batch_size = 2;
  tc.learning_rate = 1e-2;
  tc.warmup_steps = 10;
  tc.seed = 1;
  double first = -1, last = -1;
  const Checkpoint a = fit(init, data, tc, [&](int step, double loss) {
    if (step == 0) first = loss;
    last = loss;
  });
  EXPECT_LT(last, 0.25 * first);
  EXPECT_EQ(fit(init, data, tc), a);
}

}  // namespace
}  // namespace ecd::model
