// Copyright (C) 2026 The ECD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <vector>

namespace ecd::model {

/// Replaces the visual prefix embeddings with Gaussian noise.
struct VisualNoise {
  std::uint64_t seed = 0;
  double scale = 1.0;
  bool operator==(const VisualNoise&) const = default;
};

/// Input to one forward step: visual prefix, query, and the tokens generated
/// so far. The visual prefix always precedes the text.
struct PromptState {
  std::vector<int> visual_prefix_ids;
  std::vector<int> query_ids;
  std::vector<int> generated_ids;
  std::optional<VisualNoise> visual_noise;

  int length() const {
    return static_cast<int>(visual_prefix_ids.size() + query_ids.size() + generated_ids.size());
  }
  int text_offset() const { return static_cast<int>(visual_prefix_ids.size()); }
};

/// Copy of the state whose visual prefix is replaced by noise embeddings.
PromptState distort_visual_prefix(PromptState state, std::uint64_t seed, double scale = 1.0);

/// Everything a single forward exposes about the last position.
///
/// hidden_states[0] is the embedding output and hidden_states[i] the output
/// of layer i. attention[i - 1] is a G x L matrix whose row g is head g's
/// attention distribution over all L current positions. early_exit[i - 1] is
/// the vocabulary distribution obtained by applying the head to layer i.
struct ForwardTrace {
  std::vector<Eigen::VectorXd> hidden_states;
  std::vector<Eigen::MatrixXd> attention;
  std::vector<Eigen::VectorXd> early_exit;
  Eigen::VectorXd final_dist;
  int n_visual = 0;

  int n_layers() const { return static_cast<int>(attention.size()); }
  int n_heads() const { return attention.empty() ? 0 : static_cast<int>(attention.front().rows()); }
  int vocab_size() const { return static_cast<int>(final_dist.size()); }
  bool has_early_exits() const { return !early_exit.empty(); }
};

}  // namespace ecd::model
