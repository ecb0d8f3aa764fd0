// Copyright (C) 2026 The ECD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "ecd/model/trainer.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "ecd/core/error.hpp"
#include "ecd/core/random.hpp"

namespace ecd::model {
namespace {

template <typename S>
using ColVector = Eigen::Matrix<S, Eigen::Dynamic, 1>;

template <typename S>
struct NormCache {
  MatrixR<S> xhat;
  ColVector<S> rstd;
};

template <typename S>
MatrixR<S> layer_norm_rows(const MatrixR<S>& x, const RowVector<S>& gain, const RowVector<S>& bias,
                           NormCache<S>& cache) {
  const Eigen::Index rows = x.rows();
  cache.xhat.resize(rows, x.cols());
  cache.rstd.resize(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const S mean = x.row(r).mean();
    const RowVector<S> centered = x.row(r).array() - mean;
    const S rstd = S(1) / std::sqrt(centered.squaredNorm() / static_cast<S>(x.cols()) + static_cast<S>(kLayerNormEps));
    cache.rstd[r] = rstd;
    cache.xhat.row(r) = centered * rstd;
  }
  MatrixR<S> out = cache.xhat.array().rowwise() * gain.array();
  out.rowwise() += bias;
  return out;
}

template <typename S>
MatrixR<S> layer_norm_rows_backward(const MatrixR<S>& dout, const RowVector<S>& gain, const NormCache<S>& cache,
                                    RowVector<S>& dgain, RowVector<S>& dbias, S weight) {
  dgain += weight * (dout.cwiseProduct(cache.xhat)).colwise().sum();
  dbias += weight * dout.colwise().sum();
  const MatrixR<S> dxhat = dout.array().rowwise() * gain.array();
  const S inv_d = S(1) / static_cast<S>(dout.cols());
  MatrixR<S> dx(dout.rows(), dout.cols());
  for (Eigen::Index r = 0; r < dout.rows(); ++r) {
    const S mean_dxhat = dxhat.row(r).sum() * inv_d;
    const S mean_dxhat_xhat = dxhat.row(r).dot(cache.xhat.row(r)) * inv_d;
    dx.row(r) = cache.rstd[r] * (dxhat.row(r).array() - mean_dxhat - cache.xhat.row(r).array() * mean_dxhat_xhat).matrix();
  }
  return dx;
}

template <typename S>
struct LayerCache {
  MatrixR<S> input;
  NormCache<S> attn_norm;
  MatrixR<S> attn_in;
  MatrixR<S> qkv;
  std::vector<MatrixR<S>> probs;
  MatrixR<S> context;
  NormCache<S> mlp_norm;
  MatrixR<S> mlp_in;
  MatrixR<S> up_pre;
  MatrixR<S> up_act;
};

template <typename S>
struct SequenceCache {
  PromptState state;
  std::vector<LayerCache<S>> layers;
  MatrixR<S> final_input;
  NormCache<S> final_norm;
  MatrixR<S> final_out;
};

template <typename S>
void check_example(const ModelConfig& c, const TrainingExample& ex) {
  if (ex.tokens.size() < 2) throw ConfigError("training example needs at least two tokens");
  if (ex.first_target < 1 || ex.first_target >= static_cast<int>(ex.tokens.size())) {
    throw ConfigError("training example first_target out of range");
  }
  if (static_cast<int>(ex.visual_prefix_ids.size() + ex.tokens.size()) > c.max_seq_len) {
    throw ConfigError("training example exceeds max_seq_len");
  }
}

// Full-sequence causal forward; returns the final hidden states (T x d).
template <typename S>
MatrixR<S> forward_all(const Transformer<S>& model, const TrainingExample& ex, SequenceCache<S>& cache) {
  const auto& c = model.config();
  const auto& p = model.params();
  const int d = c.d_model;
  const int dh = c.head_dim();
  const S scale = S(1) / std::sqrt(static_cast<S>(dh));

  cache.state.visual_prefix_ids = ex.visual_prefix_ids;
  cache.state.query_ids = ex.tokens;
  model.check_state(cache.state);
  const int length = cache.state.length();

  MatrixR<S> x(length, d);
  for (int pos = 0; pos < length; ++pos) x.row(pos) = model.embed_position(cache.state, pos);

  cache.layers.resize(static_cast<std::size_t>(c.n_layers));
  for (int l = 0; l < c.n_layers; ++l) {
    const auto& lw = p.layers[static_cast<std::size_t>(l)];
    auto& lc = cache.layers[static_cast<std::size_t>(l)];
    lc.input = x;
    lc.attn_in = layer_norm_rows<S>(x, lw.attn_norm_gain, lw.attn_norm_bias, lc.attn_norm);
    lc.qkv = lc.attn_in * lw.qkv_weight;
    lc.qkv.rowwise() += lw.qkv_bias;
    lc.context.resize(length, d);
    lc.probs.resize(static_cast<std::size_t>(c.n_heads));
    for (int g = 0; g < c.n_heads; ++g) {
      MatrixR<S> scores = lc.qkv.block(0, g * dh, length, dh) * lc.qkv.block(0, d + g * dh, length, dh).transpose();
      scores *= scale;
      MatrixR<S>& probs = lc.probs[static_cast<std::size_t>(g)];
      probs = MatrixR<S>::Zero(length, length);
      for (int r = 0; r < length; ++r) {
        const S peak = scores.row(r).head(r + 1).maxCoeff();
        probs.row(r).head(r + 1) = (scores.row(r).head(r + 1).array() - peak).exp();
        probs.row(r).head(r + 1) /= probs.row(r).head(r + 1).sum();
      }
      lc.context.block(0, g * dh, length, dh) = probs * lc.qkv.block(0, 2 * d + g * dh, length, dh);
    }
    MatrixR<S> attn_out = lc.context * lw.out_weight;
    attn_out.rowwise() += lw.out_bias;
    x += attn_out;

    lc.mlp_in = layer_norm_rows<S>(x, lw.mlp_norm_gain, lw.mlp_norm_bias, lc.mlp_norm);
    lc.up_pre = lc.mlp_in * lw.up_weight;
    lc.up_pre.rowwise() += lw.up_bias;
    lc.up_act = lc.up_pre.unaryExpr([](S v) { return gelu(v); });
    MatrixR<S> down = lc.up_act * lw.down_weight;
    down.rowwise() += lw.down_bias;
    x += down;
  }
  cache.final_input = x;
  cache.final_out = layer_norm_rows<S>(x, p.final_norm_gain, p.final_norm_bias, cache.final_norm);
  return cache.final_out;
}

}  // namespace

template <typename S>
RowVector<S> training_forward_last_logits(const Transformer<S>& model, const TrainingExample& example) {
  SequenceCache<S> cache;
  const MatrixR<S> out = forward_all(model, example, cache);
  return out.row(out.rows() - 1) * model.params().head;
}

template <typename S>
S loss_and_gradient(const Transformer<S>& model, const TrainingExample& ex, Params<S>* grad, S weight) {
  const auto& c = model.config();
  const auto& p = model.params();
  check_example<S>(c, ex);
  const int d = c.d_model;
  const int dh = c.head_dim();
  const S scale = S(1) / std::sqrt(static_cast<S>(dh));

  SequenceCache<S> cache;
  const MatrixR<S> final_out = forward_all(model, ex, cache);
  const int length = static_cast<int>(final_out.rows());
  const int offset = static_cast<int>(ex.visual_prefix_ids.size());
  const int n_targets = static_cast<int>(ex.tokens.size()) - ex.first_target;

  // Rows of final_out that predict a target token.
  MatrixR<S> rows(n_targets, d);
  for (int k = 0; k < n_targets; ++k) rows.row(k) = final_out.row(offset + ex.first_target + k - 1);
  const MatrixR<S> logits = rows * p.head;

  S loss = 0;
  MatrixR<S> dlogits(n_targets, c.vocab_size);
  for (int k = 0; k < n_targets; ++k) {
    const int target = ex.tokens[static_cast<std::size_t>(ex.first_target + k)];
    const S peak = logits.row(k).maxCoeff();
    RowVector<S> e = (logits.row(k).array() - peak).exp();
    const S z = e.sum();
    loss += -(logits(k, target) - peak - std::log(z));
    dlogits.row(k) = e / z;
    dlogits(k, target) -= S(1);
  }
  loss /= static_cast<S>(n_targets);
  if (!std::isfinite(static_cast<double>(loss))) throw InvariantError("non-finite training loss");
  if (grad == nullptr) return loss;

  dlogits /= static_cast<S>(n_targets);
  grad->head += weight * (rows.transpose() * dlogits);
  const MatrixR<S> drows = dlogits * p.head.transpose();
  MatrixR<S> dfinal = MatrixR<S>::Zero(length, d);
  for (int k = 0; k < n_targets; ++k) dfinal.row(offset + ex.first_target + k - 1) = drows.row(k);

  MatrixR<S> dx = layer_norm_rows_backward<S>(dfinal, p.final_norm_gain, cache.final_norm, grad->final_norm_gain,
                                              grad->final_norm_bias, weight);

  for (int l = c.n_layers - 1; l >= 0; --l) {
    const auto& lw = p.layers[static_cast<std::size_t>(l)];
    auto& lg = grad->layers[static_cast<std::size_t>(l)];
    const auto& lc = cache.layers[static_cast<std::size_t>(l)];

    // MLP branch.
    lg.down_weight += weight * (lc.up_act.transpose() * dx);
    lg.down_bias += weight * dx.colwise().sum();
    MatrixR<S> dup = dx * lw.down_weight.transpose();
    dup = dup.cwiseProduct(lc.up_pre.unaryExpr([](S v) { return gelu_derivative(v); }));
    lg.up_weight += weight * (lc.mlp_in.transpose() * dup);
    lg.up_bias += weight * dup.colwise().sum();
    const MatrixR<S> dmlp_in = dup * lw.up_weight.transpose();
    dx += layer_norm_rows_backward<S>(dmlp_in, lw.mlp_norm_gain, lc.mlp_norm, lg.mlp_norm_gain, lg.mlp_norm_bias,
                                      weight);

    // Attention branch.
    lg.out_weight += weight * (lc.context.transpose() * dx);
    lg.out_bias += weight * dx.colwise().sum();
    const MatrixR<S> dcontext = dx * lw.out_weight.transpose();
    MatrixR<S> dqkv(length, 3 * d);
    for (int g = 0; g < c.n_heads; ++g) {
      const MatrixR<S>& probs = lc.probs[static_cast<std::size_t>(g)];
      const auto q = lc.qkv.block(0, g * dh, length, dh);
      const auto k = lc.qkv.block(0, d + g * dh, length, dh);
      const auto v = lc.qkv.block(0, 2 * d + g * dh, length, dh);
      const auto dctx = dcontext.block(0, g * dh, length, dh);
      const MatrixR<S> dprobs = dctx * v.transpose();
      dqkv.block(0, 2 * d + g * dh, length, dh) = probs.transpose() * dctx;
      const ColVector<S> row_dot = dprobs.cwiseProduct(probs).rowwise().sum();
      MatrixR<S> dscores = probs.cwiseProduct(dprobs.colwise() - row_dot);
      dscores *= scale;
      dqkv.block(0, g * dh, length, dh) = dscores * k;
      dqkv.block(0, d + g * dh, length, dh) = dscores.transpose() * q;
    }
    lg.qkv_weight += weight * (lc.attn_in.transpose() * dqkv);
    lg.qkv_bias += weight * dqkv.colwise().sum();
    const MatrixR<S> dattn_in = dqkv * lw.qkv_weight.transpose();
    dx += layer_norm_rows_backward<S>(dattn_in, lw.attn_norm_gain, lc.attn_norm, lg.attn_norm_gain,
                                      lg.attn_norm_bias, weight);
  }

  // Embeddings.
  for (int pos = 0; pos < length; ++pos) {
    grad->position_embedding.row(pos) += weight * dx.row(pos);
    if (pos < offset) {
      grad->visual_embedding.row(ex.visual_prefix_ids[static_cast<std::size_t>(pos)]) += weight * dx.row(pos);
    } else {
      grad->token_embedding.row(ex.tokens[static_cast<std::size_t>(pos - offset)]) += weight * dx.row(pos);
    }
  }
  return loss;
}

Checkpoint fit(const Checkpoint& init, const std::vector<TrainingExample>& examples, const TrainConfig& config,
               const TrainProgress& progress) {
  if (examples.empty()) throw ConfigError("no training examples");
  if (config.steps < 0 || config.batch_size < 1) throw ConfigError("invalid training schedule");
  Transformer<float> model(init);
  for (const auto& ex : examples) check_example<float>(model.config(), ex);

  Params<float> grad = Params<float>::zeros(model.config());
  Params<float> first_moment = Params<float>::zeros(model.config());
  Params<float> second_moment = Params<float>::zeros(model.config());

  // Flat views, identical ordering across the four parameter sets.
  struct Slot {
    float* param;
    float* grad;
    float* m;
    float* v;
    Eigen::Index size;
  };
  std::vector<Slot> slots;
  model.mutable_params().for_each([&](const std::string&, float* data, Eigen::Index size) {
    slots.push_back({data, nullptr, nullptr, nullptr, size});
  });
  std::size_t idx = 0;
  grad.for_each([&](const std::string&, float* data, Eigen::Index) { slots[idx++].grad = data; });
  idx = 0;
  first_moment.for_each([&](const std::string&, float* data, Eigen::Index) { slots[idx++].m = data; });
  idx = 0;
  second_moment.for_each([&](const std::string&, float* data, Eigen::Index) { slots[idx++].v = data; });

  Rng rng(config.seed);
  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order.begin(), order.end());
  std::size_t cursor = 0;

  double beta1_power = 1.0, beta2_power = 1.0;
  for (int step = 0; step < config.steps; ++step) {
    for (auto& s : slots) Eigen::Map<Eigen::VectorXf>(s.grad, s.size).setZero();
    double batch_loss = 0.0;
    for (int b = 0; b < config.batch_size; ++b) {
      if (cursor == order.size()) {
        rng.shuffle(order.begin(), order.end());
        cursor = 0;
      }
      const auto& ex = examples[order[cursor++]];
      batch_loss += loss_and_gradient<float>(model, ex, &grad, 1.0f / static_cast<float>(config.batch_size));
    }
    batch_loss /= config.batch_size;

    double norm_sq = 0.0;
    for (const auto& s : slots) norm_sq += Eigen::Map<Eigen::VectorXf>(s.grad, s.size).cast<double>().squaredNorm();
    const double norm = std::sqrt(norm_sq);
    if (!std::isfinite(norm)) throw InvariantError("non-finite gradient at step " + std::to_string(step));
    const double clip = (config.grad_clip > 0.0 && norm > config.grad_clip) ? config.grad_clip / norm : 1.0;

    double lr = config.learning_rate;
    if (step < config.warmup_steps) {
      lr *= static_cast<double>(step + 1) / config.warmup_steps;
    } else if (config.steps > config.warmup_steps) {
      const double progress_frac =
          static_cast<double>(step - config.warmup_steps) / (config.steps - config.warmup_steps);
      lr *= 0.1 + 0.9 * 0.5 * (1.0 + std::cos(std::numbers::pi * progress_frac));
    }
    beta1_power *= config.adam_beta1;
    beta2_power *= config.adam_beta2;
    const float b1 = static_cast<float>(config.adam_beta1);
    const float b2 = static_cast<float>(config.adam_beta2);
    const float step_size = static_cast<float>(lr / (1.0 - beta1_power));
    const float bias2 = static_cast<float>(1.0 - beta2_power);
    const float eps = static_cast<float>(config.adam_eps);
    const float clip_f = static_cast<float>(clip);
    for (const auto& s : slots) {
      for (Eigen::Index i = 0; i < s.size; ++i) {
        const float g = s.grad[i] * clip_f;
        s.m[i] = b1 * s.m[i] + (1.0f - b1) * g;
        s.v[i] = b2 * s.v[i] + (1.0f - b2) * g * g;
        s.param[i] -= step_size * s.m[i] / (std::sqrt(s.v[i] / bias2) + eps);
      }
    }
    if (progress) progress(step, batch_loss);
  }

  Checkpoint out = init;
  model.params().store(out);
  return out;
}

#define ECD_INSTANTIATE(S)                                                                          \
  template S loss_and_gradient<S>(const Transformer<S>&, const TrainingExample&, Params<S>*, S); \
  template RowVector<S> training_forward_last_logits<S>(const Transformer<S>&, const TrainingExample&);

ECD_INSTANTIATE(float)
ECD_INSTANTIATE(double)

#undef ECD_INSTANTIATE

}  // namespace ecd::model
