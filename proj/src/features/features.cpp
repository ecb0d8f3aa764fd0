// Copyright (C) 2026 The ECD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "ecd/features/features.hpp"

#include <cmath>

#include "ecd/core/audit.hpp"
#include "ecd/core/error.hpp"
#include "ecd/core/numeric.hpp"

namespace ecd::features {
namespace {

using model::ForwardTrace;

void check_trace(const ForwardTrace& trace) {
  if (trace.n_layers() < 1 || static_cast<int>(trace.early_exit.size()) != trace.n_layers()) {
    throw ConfigError("trace must carry one early-exit distribution per layer");
  }
}

void check_token(const ForwardTrace& trace, int token) {
  if (token < 0 || token >= trace.vocab_size()) {
    throw ConfigError("token id " + std::to_string(token) + " out of range");
  }
}

void check_visual(const ForwardTrace& trace) {
  if (trace.n_visual < 1) throw ConfigError("image-attention features need at least one visual token");
}

struct VocabStats {
  double variance = 0, entropy = 0, variation_ratio = 0, margin = 0, log_max = 0;
};

VocabStats vocab_stats(const Eigen::VectorXd& p) {
  const Eigen::Index v = p.size();
  double mean = 0.0;
  for (Eigen::Index y = 0; y < v; ++y) mean += clamped_log(p[y]);
  mean /= static_cast<double>(v);
  VocabStats s;
  double entropy = 0.0;
  Eigen::Index top = 0;
  for (Eigen::Index y = 0; y < v; ++y) {
    const double d = clamped_log(p[y]) - mean;
    s.variance += d * d;
    entropy -= xlogx(p[y]);
    if (p[y] > p[top]) top = y;
  }
  s.variance /= static_cast<double>(v);
  s.entropy = entropy / std::log(static_cast<double>(v));
  double second = 0.0;
  for (Eigen::Index y = 0; y < v; ++y) {
    if (y != top) second = std::max(second, p[y]);
  }
  s.variation_ratio = 1.0 - p[top];
  s.margin = s.variation_ratio + second;
  s.log_max = clamped_log(p[top]);
  return s;
}

std::vector<double> image_attention_means(const ForwardTrace& trace) {
  check_visual(trace);
  const Eigen::MatrixXd& last = trace.attention.back();
  std::vector<double> out(static_cast<std::size_t>(last.rows()));
  for (Eigen::Index g = 0; g < last.rows(); ++g) {
    out[static_cast<std::size_t>(g)] = last.row(g).head(trace.n_visual).sum() / trace.n_visual;
  }
  return out;
}

double full_kl(const Eigen::VectorXd& last, const Eigen::VectorXd& layer) {
  double kl = 0.0;
  for (Eigen::Index y = 0; y < last.size(); ++y) {
    if (last[y] > 0.0) kl += last[y] * (clamped_log(last[y]) - clamped_log(layer[y]));
  }
  return kl;
}

}  // namespace

void GenerationHistory::push(int token, double log_prob) {
  tokens_.push_back(token);
  log_probs_.push_back(log_prob);
  ++counts_[token];
  cumulative_ += log_prob;
}

int GenerationHistory::occurrences(int token) const {
  auto it = counts_.find(token);
  return it == counts_.end() ? 0 : it->second;
}

std::vector<double> nll_per_layer(const ForwardTrace& trace, int token) {
  check_trace(trace);
  check_token(trace, token);
  std::vector<double> out;
  out.reserve(trace.early_exit.size());
  for (const auto& p : trace.early_exit) out.push_back(-clamped_log(p[token]));
  return out;
}

std::vector<double> kl_per_layer(const ForwardTrace& trace, int token, bool use_full_kl) {
  check_trace(trace);
  check_token(trace, token);
  const auto& last = trace.early_exit.back();
  std::vector<double> out;
  for (int i = 0; i + 1 < trace.n_layers(); ++i) {
    const auto& layer = trace.early_exit[static_cast<std::size_t>(i)];
    if (use_full_kl) {
      out.push_back(full_kl(last, layer));
    } else {
      const double pn = std::max(last[token], kProbFloor);
      out.push_back(pn * (clamped_log(pn) - clamped_log(layer[token])));
    }
  }
  return out;
}

std::vector<double> attn_entropy_over_layers(const ForwardTrace& trace) {
  check_visual(trace);
  const int n_layers = trace.n_layers();
  const int n_heads = trace.n_heads();
  std::vector<double> out(static_cast<std::size_t>(n_heads), 0.0);
  for (int g = 0; g < n_heads; ++g) {
    double total = 0.0;
    for (int k = 0; k < trace.n_visual; ++k) {
      double sum = 0.0;
      for (int i = 0; i < n_layers; ++i) sum += xlogx(trace.attention[static_cast<std::size_t>(i)](g, k));
      total += -sum / n_layers;
    }
    out[static_cast<std::size_t>(g)] = total / trace.n_visual;
  }
  return out;
}

std::vector<double> attn_entropy_over_heads(const ForwardTrace& trace) {
  check_visual(trace);
  const int n_layers = trace.n_layers();
  const int n_heads = trace.n_heads();
  std::vector<double> out(static_cast<std::size_t>(n_layers), 0.0);
  for (int i = 0; i < n_layers; ++i) {
    const auto& att = trace.attention[static_cast<std::size_t>(i)];
    double total = 0.0;
    for (int k = 0; k < trace.n_visual; ++k) {
      double sum = 0.0;
      for (int g = 0; g < n_heads; ++g) sum += xlogx(att(g, k));
      total += -sum / n_heads;
    }
    out[static_cast<std::size_t>(i)] = total / trace.n_visual;
  }
  return out;
}

std::vector<double> baseline_features(const GenerationHistory& history, const ForwardTrace& trace, int token,
                                      double length_penalty) {
  check_token(trace, token);
  const VocabStats stats = vocab_stats(trace.final_dist);
  const std::vector<double> attention = image_attention_means(trace);
  const int t = history.next_step();
  const double log_prob = clamped_log(trace.final_dist[token]);
  const double cumulative = history.cumulative_log_prob() + log_prob;

  std::vector<double> out;
  out.reserve(10 + attention.size());
  out.push_back(t);
  out.push_back(history.occurrences(token) + 1);
  out.insert(out.end(), attention.begin(), attention.end());
  out.push_back(log_prob);
  out.push_back(cumulative);
  out.push_back(cumulative / std::pow(static_cast<double>(t), length_penalty));
  out.push_back(stats.variance);
  out.push_back(stats.entropy);
  out.push_back(stats.variation_ratio);
  out.push_back(stats.margin);
  out.push_back(stats.log_max - log_prob);
  return out;
}

FeatureVector assemble_features(const FeatureSchema& schema, const ForwardTrace& trace,
                                const GenerationHistory& history, int token, const FeatureOptions& options) {
  FeatureVector fv;
  fv.token_id = token;
  fv.step = history.next_step();
  fv.values.resize(static_cast<std::size_t>(schema.size()));
  StepFeatures step(schema, trace, history, options);
  step.fill(token, fv.values);
  return fv;
}

StepFeatures::StepFeatures(const FeatureSchema& schema, const ForwardTrace& trace, const GenerationHistory& history,
                           const FeatureOptions& options)
    : schema_(&schema), trace_(&trace), history_(&history), options_(options) {
  check_trace(trace);
  if (schema != FeatureSchema::canonical(trace.n_layers(), trace.n_heads())) {
    throw DataError("feature schema does not match the canonical layout for N=" + std::to_string(trace.n_layers()) +
                    ", G=" + std::to_string(trace.n_heads()));
  }
  attention_means_ = image_attention_means(trace);
  const VocabStats stats = vocab_stats(trace.final_dist);
  variance_ = stats.variance;
  entropy_ = stats.entropy;
  variation_ratio_ = stats.variation_ratio;
  margin_ = stats.margin;
  log_max_ = stats.log_max;
  if (options.full_kl) {
    for (int i = 0; i + 1 < trace.n_layers(); ++i) {
      full_kl_.push_back(full_kl(trace.early_exit.back(), trace.early_exit[static_cast<std::size_t>(i)]));
    }
  }
  layer_entropy_ = attn_entropy_over_layers(trace);
  head_entropy_ = attn_entropy_over_heads(trace);
}

void StepFeatures::fill(int token, std::span<double> out) const {
  const auto& trace = *trace_;
  check_token(trace, token);
  if (static_cast<int>(out.size()) != schema_->size()) throw DataError("feature buffer has the wrong dimension");
  const int n_layers = schema_->n_layers;
  const int n_heads = schema_->n_heads;
  const int t = history_->next_step();
  const double log_prob = clamped_log(trace.final_dist[token]);
  const double cumulative = history_->cumulative_log_prob() + log_prob;

  std::size_t k = 0;
  out[k++] = t;
  out[k++] = history_->occurrences(token) + 1;
  for (double a : attention_means_) out[k++] = a;
  out[k++] = log_prob;
  out[k++] = cumulative;
  out[k++] = cumulative / std::pow(static_cast<double>(t), options_.length_penalty);
  out[k++] = variance_;
  out[k++] = entropy_;
  out[k++] = variation_ratio_;
  out[k++] = margin_;
  out[k++] = log_max_ - log_prob;

  const double pn = std::max(trace.final_dist[token], kProbFloor);
  for (int i = 0; i < n_layers; ++i) out[k++] = -clamped_log(trace.early_exit[static_cast<std::size_t>(i)][token]);
  for (int i = 0; i + 1 < n_layers; ++i) {
    out[k++] = options_.full_kl
                   ? full_kl_[static_cast<std::size_t>(i)]
                   : pn * (clamped_log(pn) - clamped_log(trace.early_exit[static_cast<std::size_t>(i)][token]));
  }
  for (int g = 0; g < n_heads; ++g) out[k++] = layer_entropy_[static_cast<std::size_t>(g)];
  for (int i = 0; i < n_layers; ++i) out[k++] = head_entropy_[static_cast<std::size_t>(i)];
  if (audit::enabled()) audit::check_features(out, "feature vector");
}

Eigen::MatrixXd StepFeatures::rows(std::span<const int> tokens) const {
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> m(static_cast<Eigen::Index>(tokens.size()),
                                                                           schema_->size());
  for (std::size_t r = 0; r < tokens.size(); ++r) {
    fill(tokens[r], std::span<double>(m.row(static_cast<Eigen::Index>(r)).data(), static_cast<std::size_t>(m.cols())));
  }
  return m;
}

}  // namespace ecd::features
