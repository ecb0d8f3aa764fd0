// Copyright (C) 2026 The ECD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace ecd::model {

/// Architecture hyperparameters of the decoder.
///
/// n_visual_tokens is the length of the visual prefix (one position per
/// image token); n_visual_slots is the number of rows in the visual
/// embedding table that prefix ids index into.
struct ModelConfig {
  int vocab_size = 512;
  int n_layers = 4;
  int n_heads = 4;
  int d_model = 128;
  int d_ff = 512;
  int max_seq_len = 320;
  int n_visual_tokens = 8;
  int n_visual_slots = 48;
  std::uint64_t seed = 0;

  int head_dim() const { return d_model / n_heads; }

  /// Throws ConfigError naming the violated invariant.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

/// Row-major shape of every parameter tensor implied by the config.
std::map<std::string, std::vector<std::int64_t>> expected_shapes(const ModelConfig& config);

std::string layer_prefix(int layer);

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

}  // namespace ecd::model
