// Copyright (C) 2026 The ECD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "ecd/model/config.hpp"

#include "ecd/core/error.hpp"

namespace ecd::model {

void ModelConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(what);
  };
  require(vocab_size >= 4, "vocab_size must be at least 4");
  require(n_layers > 0, "n_layers must be positive");
  require(n_heads > 0, "n_heads must be positive");
  require(d_model > 0, "d_model must be positive");
  require(d_model % n_heads == 0, "d_model not divisible by n_heads");
  require(d_ff > 0, "d_ff must be positive");
  require(max_seq_len > 0, "max_seq_len must be positive");
  require(n_visual_tokens >= 0, "n_visual_tokens must be non-negative");
  require(n_visual_tokens + 2 <= max_seq_len, "n_visual_tokens + 2 exceeds max_seq_len");
  require(n_visual_slots > 0, "n_visual_slots must be positive");
}

std::string layer_prefix(int layer) { return "layers." + std::to_string(layer) + "."; }

std::map<std::string, std::vector<std::int64_t>> expected_shapes(const ModelConfig& c) {
  const std::int64_t d = c.d_model;
  std::map<std::string, std::vector<std::int64_t>> shapes;
  shapes["token_embedding"] = {c.vocab_size, d};
  shapes["position_embedding"] = {c.max_seq_len, d};
  shapes["visual_embedding"] = {c.n_visual_slots, d};
  for (int i = 0; i < c.n_layers; ++i) {
    const std::string p = layer_prefix(i);
    shapes[p + "attn_norm.gain"] = {d};
    shapes[p + "attn_norm.bias"] = {d};
    shapes[p + "attn.qkv.weight"] = {d, 3 * d};
    shapes[p + "attn.qkv.bias"] = {3 * d};
    shapes[p + "attn.out.weight"] = {d, d};
    shapes[p + "attn.out.bias"] = {d};
    shapes[p + "mlp_norm.gain"] = {d};
    shapes[p + "mlp_norm.bias"] = {d};
    shapes[p + "mlp.up.weight"] = {d, c.d_ff};
    shapes[p + "mlp.up.bias"] = {c.d_ff};
    shapes[p + "mlp.down.weight"] = {c.d_ff, d};
    shapes[p + "mlp.down.bias"] = {d};
  }
  shapes["final_norm.gain"] = {d};
  shapes["final_norm.bias"] = {d};
  shapes["head.weight"] = {d, c.vocab_size};
  return shapes;
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"vocab_size", c.vocab_size},
                     {"n_layers", c.n_layers},
                     {"n_heads", c.n_heads},
                     {"d_model", c.d_model},
                     {"d_ff", c.d_ff},
                     {"max_seq_len", c.max_seq_len},
                     {"n_visual_tokens", c.n_visual_tokens},
                     {"n_visual_slots", c.n_visual_slots},
                     {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  ModelConfig d;
  c.vocab_size = j.value("vocab_size", d.vocab_size);
  c.n_layers = j.value("n_layers", d.n_layers);
  c.n_heads = j.value("n_heads", d.n_heads);
  c.d_model = j.value("d_model", d.d_model);
  c.d_ff = j.value("d_ff", d.d_ff);
  c.max_seq_len = j.value("max_seq_len", d.max_seq_len);
  c.n_visual_tokens = j.value("n_visual_tokens", d.n_visual_tokens);
  c.n_visual_slots = j.value("n_visual_slots", d.n_visual_slots);
  c.seed = j.value("seed", d.seed);
}

}  // namespace ecd::model
