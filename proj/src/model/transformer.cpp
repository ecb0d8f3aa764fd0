// Copyright (C) 2026 The ECD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "ecd/model/transformer.hpp"

#include <cmath>

#include "ecd/core/audit.hpp"
#include "ecd/core/error.hpp"
#include "ecd/core/numeric.hpp"
#include "ecd/core/random.hpp"
#include "ecd/core/timer.hpp"

namespace ecd::model {
namespace {

template <typename Scalar>
RowVector<Scalar> layer_norm(const RowVector<Scalar>& x, const RowVector<Scalar>& gain,
                             const RowVector<Scalar>& bias) {
  const Scalar mean = x.mean();
  const RowVector<Scalar> centered = x.array() - mean;
  const Scalar variance = centered.squaredNorm() / static_cast<Scalar>(x.size());
  const Scalar rstd = Scalar(1) / std::sqrt(variance + static_cast<Scalar>(kLayerNormEps));
  return (centered * rstd).cwiseProduct(gain) + bias;
}

}  // namespace

template <typename Scalar>
Scalar gelu(Scalar x) {
  constexpr Scalar c = Scalar(0.7978845608028654);  // sqrt(2 / pi)
  return Scalar(0.5) * x * (Scalar(1) + std::tanh(c * (x + Scalar(0.044715) * x * x * x)));
}

template <typename Scalar>
Scalar gelu_derivative(Scalar x) {
  constexpr Scalar c = Scalar(0.7978845608028654);
  const Scalar inner = c * (x + Scalar(0.044715) * x * x * x);
  const Scalar t = std::tanh(inner);
  const Scalar dinner = c * (Scalar(1) + Scalar(3 * 0.044715) * x * x);
  return Scalar(0.5) * (Scalar(1) + t) + Scalar(0.5) * x * (Scalar(1) - t * t) * dinner;
}

template <typename Scalar>
Params<Scalar> Params<Scalar>::zeros(const ModelConfig& c) {
  c.validate();
  const int d = c.d_model;
  Params p;
  p.token_embedding = MatrixR<Scalar>::Zero(c.vocab_size, d);
  p.position_embedding = MatrixR<Scalar>::Zero(c.max_seq_len, d);
  p.visual_embedding = MatrixR<Scalar>::Zero(c.n_visual_slots, d);
  p.layers.resize(static_cast<std::size_t>(c.n_layers));
  for (auto& l : p.layers) {
    l.attn_norm_gain = RowVector<Scalar>::Zero(d);
    l.attn_norm_bias = RowVector<Scalar>::Zero(d);
    l.qkv_weight = MatrixR<Scalar>::Zero(d, 3 * d);
    l.qkv_bias = RowVector<Scalar>::Zero(3 * d);
    l.out_weight = MatrixR<Scalar>::Zero(d, d);
    l.out_bias = RowVector<Scalar>::Zero(d);
    l.mlp_norm_gain = RowVector<Scalar>::Zero(d);
    l.mlp_norm_bias = RowVector<Scalar>::Zero(d);
    l.up_weight = MatrixR<Scalar>::Zero(d, c.d_ff);
    l.up_bias = RowVector<Scalar>::Zero(c.d_ff);
    l.down_weight = MatrixR<Scalar>::Zero(c.d_ff, d);
    l.down_bias = RowVector<Scalar>::Zero(d);
  }
  p.final_norm_gain = RowVector<Scalar>::Zero(d);
  p.final_norm_bias = RowVector<Scalar>::Zero(d);
  p.head = MatrixR<Scalar>::Zero(d, c.vocab_size);
  return p;
}

template <typename Scalar>
Params<Scalar> Params<Scalar>::from_checkpoint(const Checkpoint& cp) {
  cp.validate();
  Params p = zeros(cp.config);
  p.for_each([&](const std::string& name, Scalar* data, Eigen::Index size) {
    const auto& values = cp.at(name).values;
    if (static_cast<Eigen::Index>(values.size()) != size) {
      throw DataError("tensor '" + name + "' size mismatch");
    }
    for (Eigen::Index i = 0; i < size; ++i) data[i] = static_cast<Scalar>(values[static_cast<std::size_t>(i)]);
  });
  return p;
}

template <typename Scalar>
void Params<Scalar>::store(Checkpoint& cp) const {
  const auto shapes = expected_shapes(cp.config);
  for_each([&](const std::string& name, const Scalar* data, Eigen::Index size) {
    Tensor& t = cp.tensors[name];
    t.shape = shapes.at(name);
    t.values.resize(static_cast<std::size_t>(size));
    for (Eigen::Index i = 0; i < size; ++i) t.values[static_cast<std::size_t>(i)] = static_cast<float>(data[i]);
  });
}

template <typename Scalar>
Transformer<Scalar>::Transformer(const Checkpoint& checkpoint)
    : config_(checkpoint.config), params_(Params<Scalar>::from_checkpoint(checkpoint)) {}

template <typename Scalar>
Transformer<Scalar>::Transformer(ModelConfig config, Params<Scalar> params)
    : config_(config), params_(std::move(params)) {
  config_.validate();
}

template <typename Scalar>
void Transformer<Scalar>::check_state(const PromptState& state) const {
  if (state.length() < 1) throw ConfigError("empty prompt state");
  if (state.length() > config_.max_seq_len) {
    throw ConfigError("sequence too long: " + std::to_string(state.length()) + " > max_seq_len " +
                      std::to_string(config_.max_seq_len));
  }
  if (static_cast<int>(state.visual_prefix_ids.size()) != config_.n_visual_tokens) {
    throw ConfigError("visual prefix must have exactly n_visual_tokens = " +
                      std::to_string(config_.n_visual_tokens) + " entries");
  }
  for (int id : state.visual_prefix_ids) {
    if (id < 0 || id >= config_.n_visual_slots) throw ConfigError("visual slot id out of range");
  }
  auto check_tokens = [&](const std::vector<int>& ids) {
    for (int id : ids) {
      if (id < 0 || id >= config_.vocab_size) throw ConfigError("token id " + std::to_string(id) + " out of range");
    }
  };
  check_tokens(state.query_ids);
  check_tokens(state.generated_ids);
}

template <typename Scalar>
RowVector<Scalar> Transformer<Scalar>::embed_position(const PromptState& state, int position) const {
  const int n_visual = state.text_offset();
  RowVector<Scalar> x;
  if (position < n_visual) {
    if (state.visual_noise) {
      Rng rng(derive_seed(state.visual_noise->seed, static_cast<std::uint64_t>(position)));
      x.resize(config_.d_model);
      for (int k = 0; k < config_.d_model; ++k) {
        x[k] = static_cast<Scalar>(state.visual_noise->scale * rng.normal());
      }
    } else {
      x = params_.visual_embedding.row(state.visual_prefix_ids[static_cast<std::size_t>(position)]);
    }
  } else {
    const int text_pos = position - n_visual;
    const int n_query = static_cast<int>(state.query_ids.size());
    const int id = text_pos < n_query ? state.query_ids[static_cast<std::size_t>(text_pos)]
                                      : state.generated_ids[static_cast<std::size_t>(text_pos - n_query)];
    x = params_.token_embedding.row(id);
  }
  return x + params_.position_embedding.row(position);
}

template <typename Scalar>
RowVector<Scalar> Transformer<Scalar>::head_logits(const RowVector<Scalar>& hidden) const {
  return layer_norm<Scalar>(hidden, params_.final_norm_gain, params_.final_norm_bias) * params_.head;
}

template <typename Scalar>
ForwardSession<Scalar>::ForwardSession(const Transformer<Scalar>& model, PromptState prompt, TraceLevel level)
    : model_(&model), state_(std::move(prompt)), level_(level) {
  model.check_state(state_);
  const auto& c = model.config();
  keys_.assign(static_cast<std::size_t>(c.n_layers), MatrixR<Scalar>::Zero(c.max_seq_len, c.d_model));
  values_.assign(static_cast<std::size_t>(c.n_layers), MatrixR<Scalar>::Zero(c.max_seq_len, c.d_model));

  const std::int64_t t0 = monotonic_ns();
  const int length = state_.length();
  for (int pos = 0; pos < length; ++pos) run_position(pos, pos + 1 == length);
  last_forward_ns_ = monotonic_ns() - t0;
  total_forward_ns_ += last_forward_ns_;
  ++forward_count_;
}

template <typename Scalar>
void ForwardSession<Scalar>::append(int token) {
  const auto& c = model_->config();
  if (token < 0 || token >= c.vocab_size) throw ConfigError("token id " + std::to_string(token) + " out of range");
  if (state_.length() + 1 > c.max_seq_len) {
    throw ConfigError("sequence too long: appending would exceed max_seq_len " + std::to_string(c.max_seq_len));
  }
  const std::int64_t t0 = monotonic_ns();
  state_.generated_ids.push_back(token);
  run_position(state_.length() - 1, true);
  last_forward_ns_ = monotonic_ns() - t0;
  total_forward_ns_ += last_forward_ns_;
  ++forward_count_;
}

template <typename Scalar>
void ForwardSession<Scalar>::run_position(int position, bool capture) {
  const auto& c = model_->config();
  const auto& p = model_->params();
  const int d = c.d_model;
  const int dh = c.head_dim();
  const int n_keys = position + 1;
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));

  if (capture) {
    trace_ = ForwardTrace{};
    trace_.n_visual = state_.text_offset();
    trace_.hidden_states.reserve(static_cast<std::size_t>(c.n_layers + 1));
    trace_.attention.reserve(static_cast<std::size_t>(c.n_layers));
  }

  RowVector<Scalar> x = model_->embed_position(state_, position);
  if (capture) trace_.hidden_states.push_back(x.transpose().template cast<double>());

  RowVector<Scalar> context(d);
  for (int l = 0; l < c.n_layers; ++l) {
    const auto& lw = p.layers[static_cast<std::size_t>(l)];
    auto& keys = keys_[static_cast<std::size_t>(l)];
    auto& values = values_[static_cast<std::size_t>(l)];

    const RowVector<Scalar> h = layer_norm<Scalar>(x, lw.attn_norm_gain, lw.attn_norm_bias);
    const RowVector<Scalar> qkv = h * lw.qkv_weight + lw.qkv_bias;
    keys.row(position) = qkv.segment(d, d);
    values.row(position) = qkv.segment(2 * d, d);

    Eigen::MatrixXd attention;
    if (capture) attention.resize(c.n_heads, n_keys);
    for (int g = 0; g < c.n_heads; ++g) {
      const auto q = qkv.segment(g * dh, dh);
      const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> scores =
          (keys.block(0, g * dh, n_keys, dh) * q.transpose()) * scale;
      const Eigen::VectorXd probs = softmax(scores);
      context.segment(g * dh, dh) =
          probs.transpose().template cast<Scalar>() * values.block(0, g * dh, n_keys, dh);
      if (capture) attention.row(g) = probs.transpose();
    }
    x += context * lw.out_weight + lw.out_bias;

    const RowVector<Scalar> h2 = layer_norm<Scalar>(x, lw.mlp_norm_gain, lw.mlp_norm_bias);
    RowVector<Scalar> up = h2 * lw.up_weight + lw.up_bias;
    up = up.unaryExpr([](Scalar v) { return gelu(v); });
    x += up * lw.down_weight + lw.down_bias;

    if (capture) {
      if (audit::enabled()) audit::check_attention(attention, "attention");
      trace_.attention.push_back(std::move(attention));
      trace_.hidden_states.push_back(x.transpose().template cast<double>());
    }
  }

  if (!capture) return;
  if (level_ == TraceLevel::full) {
    trace_.early_exit.reserve(static_cast<std::size_t>(c.n_layers));
    for (int i = 1; i <= c.n_layers; ++i) {
      const RowVector<Scalar> h = trace_.hidden_states[static_cast<std::size_t>(i)].transpose().template cast<Scalar>();
      trace_.early_exit.push_back(softmax(model_->head_logits(h).transpose()));
    }
    trace_.final_dist = trace_.early_exit.back();
    if (audit::enabled()) {
      for (const auto& p : trace_.early_exit) audit::check_distribution(p, "early-exit distribution");
    }
  } else {
    trace_.final_dist = softmax(model_->head_logits(x).transpose());
    if (audit::enabled()) audit::check_distribution(trace_.final_dist, "output distribution");
  }
}

template <typename Scalar>
ForwardTrace forward_step(const Transformer<Scalar>& model, const PromptState& state, TraceLevel level) {
  ForwardSession<Scalar> session(model, state, level);
  return session.trace();
}

ForwardTrace forward_step(const Checkpoint& checkpoint, const PromptState& state) {
  const Model model(checkpoint);
  return forward_step(model, state);
}

template <typename Scalar>
Eigen::VectorXd early_exit_distribution(const Transformer<Scalar>& model, const ForwardTrace& trace, int layer) {
  const int n_layers = static_cast<int>(trace.hidden_states.size()) - 1;
  if (layer < 1 || layer > n_layers) {
    throw ConfigError("layer " + std::to_string(layer) + " out of range [1, " + std::to_string(n_layers) + "]");
  }
  const RowVector<Scalar> h = trace.hidden_states[static_cast<std::size_t>(layer)].transpose().template cast<Scalar>();
  return softmax(model.head_logits(h).transpose());
}

#define ECD_INSTANTIATE(Scalar)                                                                          \
  template Scalar gelu<Scalar>(Scalar);                                                                  \
  template Scalar gelu_derivative<Scalar>(Scalar);                                                       \
  template struct Params<Scalar>;                                                                        \
  template class Transformer<Scalar>;                                                                    \
  template class ForwardSession<Scalar>;                                                                 \
  template ForwardTrace forward_step<Scalar>(const Transformer<Scalar>&, const PromptState&, TraceLevel); \
  template Eigen::VectorXd early_exit_distribution<Scalar>(const Transformer<Scalar>&, const ForwardTrace&, int);

ECD_INSTANTIATE(float)
ECD_INSTANTIATE(double)

#undef ECD_INSTANTIATE

PromptState distort_visual_prefix(PromptState state, std::uint64_t seed, double scale) {
  state.visual_noise = VisualNoise{seed, scale};
  return state;
}

}  // namespace ecd::model
