// Copyright (C) 2026 The ECD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "ecd/features/schema.hpp"

#include "ecd/core/error.hpp"

namespace ecd::features {

int feature_dimension(int n_layers, int n_heads) {
  return (10 + n_heads) + n_layers + (n_layers - 1) + n_heads + n_layers;
}

FeatureSchema FeatureSchema::canonical(int n_layers, int n_heads) {
  if (n_layers < 1 || n_heads < 1) throw ConfigError("feature schema needs at least one layer and one head");
  FeatureSchema s;
  s.n_layers = n_layers;
  s.n_heads = n_heads;
  auto& n = s.names;
  n.push_back("position");
  n.push_back("occurrence");
  for (int g = 1; g <= n_heads; ++g) n.push_back("image_attention_h" + std::to_string(g));
  for (const char* base : {"log_prob", "cum_log_prob", "seq_score", "variance", "entropy", "variation_ratio",
                           "prob_margin", "prob_diff"}) {
    n.push_back(base);
  }
  for (int i = 1; i <= n_layers; ++i) n.push_back("nll_l" + std::to_string(i));
  for (int i = 1; i < n_layers; ++i) n.push_back("kl_l" + std::to_string(i));
  for (int g = 1; g <= n_heads; ++g) n.push_back("layer_entropy_h" + std::to_string(g));
  for (int i = 1; i <= n_layers; ++i) n.push_back("head_entropy_l" + std::to_string(i));
  return s;
}

int FeatureSchema::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return static_cast<int>(i);
  }
  return -1;
}

std::uint64_t FeatureSchema::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](unsigned char c) {
    h ^= c;
    h *= 0x100000001b3ull;
  };
  for (const auto& name : names) {
    for (unsigned char c : name) mix(c);
    mix(0);
  }
  return h;
}

void to_json(nlohmann::json& j, const FeatureSchema& s) {
  j = nlohmann::json{{"n_layers", s.n_layers}, {"n_heads", s.n_heads}, {"names", s.names}, {"hash", s.hash()}};
}

void from_json(const nlohmann::json& j, FeatureSchema& s) {
  s.n_layers = j.at("n_layers").get<int>();
  s.n_heads = j.at("n_heads").get<int>();
  s.names = j.at("names").get<std::vector<std::string>>();
  if (j.contains("hash") && j.at("hash").get<std::uint64_t>() != s.hash()) {
    throw DataError("feature schema hash does not match its names");
  }
}

}  // namespace ecd::features
