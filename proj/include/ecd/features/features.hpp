// Copyright (C) 2026 The ECD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include <span>
#include <unordered_map>
#include <vector>

#include "ecd/features/schema.hpp"
#include "ecd/model/trace.hpp"

namespace ecd::features {

struct FeatureOptions {
  /// Exponent l_p of the sequence-score normalization t^{l_p}.
  double length_penalty = 1.0;
  /// Replace the pointwise divergence at y_t by the full-vocabulary KL.
  bool full_kl = false;
};

/// Tokens chosen so far and the final-layer log-probability each had when
/// it was chosen.
class GenerationHistory {
 public:
  void push(int token, double log_prob);

  /// 1-based step index of the token about to be generated.
  int next_step() const { return static_cast<int>(tokens_.size()) + 1; }
  int occurrences(int token) const;
  double cumulative_log_prob() const { return cumulative_; }
  const std::vector<int>& tokens() const { return tokens_; }
  const std::vector<double>& log_probs() const { return log_probs_; }

 private:
  std::vector<int> tokens_;
  std::vector<double> log_probs_;
  std::unordered_map<int, int> counts_;
  double cumulative_ = 0.0;
};

struct FeatureVector {
  std::vector<double> values;
  int token_id = 0;
  int step = 0;
};

/// B^i(y) = -log p^i(y), i = 1..N.
std::vector<double> nll_per_layer(const model::ForwardTrace& trace, int token);

/// K^i(y) = p^N(y) log(p^N(y) / p^i(y)), i = 1..N-1 (pointwise at y). With
/// full_kl the full-vocabulary KL(p^N || p^i) is returned instead.
std::vector<double> kl_per_layer(const model::ForwardTrace& trace, int token, bool full_kl = false);

/// Per head g: mean over image tokens of -(1/N) sum_i a log a.
std::vector<double> attn_entropy_over_layers(const model::ForwardTrace& trace);

/// Per layer i: mean over image tokens of -(1/G) sum_g a log a.
std::vector<double> attn_entropy_over_heads(const model::ForwardTrace& trace);

/// The 10 + G last-layer baseline features in schema order.
std::vector<double> baseline_features(const GenerationHistory& history, const model::ForwardTrace& trace,
                                      int token, double length_penalty = 1.0);

/// Full feature vector for `token` as the next token. Throws DataError if
/// the schema is not the canonical one for the trace's (N, G).
FeatureVector assemble_features(const FeatureSchema& schema, const model::ForwardTrace& trace,
                                const GenerationHistory& history, int token,
                                const FeatureOptions& options = {});

/// Token-independent work for one step, shared across candidate tokens.
class StepFeatures {
 public:
  StepFeatures(const FeatureSchema& schema, const model::ForwardTrace& trace, const GenerationHistory& history,
               const FeatureOptions& options = {});

  int dimension() const { return schema_->size(); }
  void fill(int token, std::span<double> out) const;
  /// One row per candidate token.
  Eigen::MatrixXd rows(std::span<const int> tokens) const;

 private:
  const FeatureSchema* schema_;
  const model::ForwardTrace* trace_;
  const GenerationHistory* history_;
  FeatureOptions options_;
  std::vector<double> attention_means_;
  double variance_ = 0, entropy_ = 0, variation_ratio_ = 0, margin_ = 0, log_max_ = 0;
  std::vector<double> full_kl_;
  std::vector<double> layer_entropy_, head_entropy_;
};

}  // namespace ecd::features
