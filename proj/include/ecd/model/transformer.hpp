// Copyright (C) 2026 The ECD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

#include "ecd/model/checkpoint.hpp"
#include "ecd/model/trace.hpp"

namespace ecd::model {

template <typename Scalar>
using MatrixR = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

inline constexpr double kLayerNormEps = 1e-5;

template <typename Scalar>
struct LayerParams {
  RowVector<Scalar> attn_norm_gain, attn_norm_bias;
  MatrixR<Scalar> qkv_weight;  // d x 3d, columns [q | k | v], heads contiguous
  RowVector<Scalar> qkv_bias;
  MatrixR<Scalar> out_weight;  // d x d
  RowVector<Scalar> out_bias;
  RowVector<Scalar> mlp_norm_gain, mlp_norm_bias;
  MatrixR<Scalar> up_weight;  // d x d_ff
  RowVector<Scalar> up_bias;
  MatrixR<Scalar> down_weight;  // d_ff x d
  RowVector<Scalar> down_bias;
};

/// Dense parameter set in working precision. Tensor names and row-major
/// layout match the checkpoint.
template <typename Scalar>
struct Params {
  MatrixR<Scalar> token_embedding;     // V x d
  MatrixR<Scalar> position_embedding;  // max_seq_len x d
  MatrixR<Scalar> visual_embedding;    // n_visual_slots x d
  std::vector<LayerParams<Scalar>> layers;
  RowVector<Scalar> final_norm_gain, final_norm_bias;
  MatrixR<Scalar> head;  // d x V, the vocabulary head

  static Params zeros(const ModelConfig& config);
  static Params from_checkpoint(const Checkpoint& checkpoint);
  void store(Checkpoint& checkpoint) const;

  /// Calls f(name, data pointer, element count) for every tensor.
  template <typename F>
  void for_each(F&& f) {
    visit(*this, f);
  }
  template <typename F>
  void for_each(F&& f) const {
    visit(*this, f);
  }

 private:
  template <typename Self, typename F>
  static void visit(Self& self, F& f);
};

/// Pre-norm decoder with learned absolute positions and a visual prefix.
template <typename Scalar>
class Transformer {
 public:
  explicit Transformer(const Checkpoint& checkpoint);
  Transformer(ModelConfig config, Params<Scalar> params);

  const ModelConfig& config() const { return config_; }
  const Params<Scalar>& params() const { return params_; }
  Params<Scalar>& mutable_params() { return params_; }

  /// Throws ConfigError for empty/oversized states or out-of-range ids.
  void check_state(const PromptState& state) const;

  /// Input embedding (token or visual row plus position) for one position.
  RowVector<Scalar> embed_position(const PromptState& state, int position) const;

  /// phi(h): final layer norm followed by the vocabulary projection.
  RowVector<Scalar> head_logits(const RowVector<Scalar>& hidden) const;

 private:
  ModelConfig config_;
  Params<Scalar> params_;
};

using Model = Transformer<float>;

template <typename Scalar>
template <typename Self, typename F>
void Params<Scalar>::visit(Self& self, F& f) {
  auto emit = [&f](const std::string& name, auto& tensor) { f(name, tensor.data(), tensor.size()); };
  emit("token_embedding", self.token_embedding);
  emit("position_embedding", self.position_embedding);
  emit("visual_embedding", self.visual_embedding);
  for (std::size_t i = 0; i < self.layers.size(); ++i) {
    const std::string p = layer_prefix(static_cast<int>(i));
    auto& layer = self.layers[i];
    emit(p + "attn_norm.gain", layer.attn_norm_gain);
    emit(p + "attn_norm.bias", layer.attn_norm_bias);
    emit(p + "attn.qkv.weight", layer.qkv_weight);
    emit(p + "attn.qkv.bias", layer.qkv_bias);
    emit(p + "attn.out.weight", layer.out_weight);
    emit(p + "attn.out.bias", layer.out_bias);
    emit(p + "mlp_norm.gain", layer.mlp_norm_gain);
    emit(p + "mlp_norm.bias", layer.mlp_norm_bias);
    emit(p + "mlp.up.weight", layer.up_weight);
    emit(p + "mlp.up.bias", layer.up_bias);
    emit(p + "mlp.down.weight", layer.down_weight);
    emit(p + "mlp.down.bias", layer.down_bias);
  }
  emit("final_norm.gain", self.final_norm_gain);
  emit("final_norm.bias", self.final_norm_bias);
  emit("head.weight", self.head);
}

enum class TraceLevel { full, final_only };

/// Incremental forward over one sequence with a per-sequence key/value
/// cache. Construction runs the prompt (one forward); every append() runs
/// one more. trace() always describes the last position.
template <typename Scalar>
class ForwardSession {
 public:
  ForwardSession(const Transformer<Scalar>& model, PromptState prompt,
                 TraceLevel level = TraceLevel::full);

  const ForwardTrace& trace() const { return trace_; }
  const PromptState& state() const { return state_; }
  void append(int token);

  int forward_count() const { return forward_count_; }
  std::int64_t last_forward_ns() const { return last_forward_ns_; }
  std::int64_t total_forward_ns() const { return total_forward_ns_; }

 private:
  void run_position(int position, bool capture);

  const Transformer<Scalar>* model_;
  PromptState state_;
  TraceLevel level_;
  std::vector<MatrixR<Scalar>> keys_, values_;
  ForwardTrace trace_;
  int forward_count_ = 0;
  std::int64_t last_forward_ns_ = 0;
  std::int64_t total_forward_ns_ = 0;
};

/// Pure forward over the full state; returns the trace of the last position.
template <typename Scalar>
ForwardTrace forward_step(const Transformer<Scalar>& model, const PromptState& state,
                          TraceLevel level = TraceLevel::full);
ForwardTrace forward_step(const Checkpoint& checkpoint, const PromptState& state);

/// softmax(phi(h^layer)) from the trace's hidden states; 1 <= layer <= N.
template <typename Scalar>
Eigen::VectorXd early_exit_distribution(const Transformer<Scalar>& model, const ForwardTrace& trace,
                                        int layer);

template <typename Scalar>
Scalar gelu(Scalar x);
template <typename Scalar>
Scalar gelu_derivative(Scalar x);

}  // namespace ecd::model
