// Copyright (C) 2026 The ECD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace ecd::features {

/// Ordered feature names for a model with N layers and G heads.
///
/// Layout: the last-layer baseline block (position, occurrence, mean image
/// attention per head, log-probability, cumulative log-probability,
/// sequence score, variance, entropy, variation ratio, probability margin,
/// probability difference) followed by per-layer NLL (N), per-layer
/// divergence to the last layer (N - 1), image-attention entropy over layers
/// per head (G), and over heads per layer (N).
struct FeatureSchema {
  int n_layers = 0;
  int n_heads = 0;
  std::vector<std::string> names;

  static FeatureSchema canonical(int n_layers, int n_heads);

  int size() const { return static_cast<int>(names.size()); }
  /// -1 when absent.
  int index_of(std::string_view name) const;
  /// FNV-1a over the ordered names; persisted with detectors.
  std::uint64_t hash() const;

  int baseline_size() const { return 10 + n_heads; }
  int nll_offset() const { return baseline_size(); }
  int kl_offset() const { return nll_offset() + n_layers; }
  int layer_entropy_offset() const { return kl_offset() + n_layers - 1; }
  int head_entropy_offset() const { return layer_entropy_offset() + n_heads; }

  bool operator==(const FeatureSchema&) const = default;
};

/// |M| = (10 + G) + N + (N - 1) + G + N.
int feature_dimension(int n_layers, int n_heads);

void to_json(nlohmann::json& j, const FeatureSchema& s);
void from_json(const nlohmann::json& j, FeatureSchema& s);

}  // namespace ecd::features
