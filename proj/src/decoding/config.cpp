// Copyright (C) 2026 The ECD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "ecd/decoding/config.hpp"

#include <cmath>

#include "ecd/core/error.hpp"

namespace ecd::decoding {

std::string to_string(Strategy s) { return s == Strategy::greedy ? "greedy" : "nucleus"; }

std::string to_string(DecodeMode m) {
  switch (m) {
    case DecodeMode::regular:
      return "regular";
    case DecodeMode::ecd:
      return "ecd";
    case DecodeMode::dual_pass_baseline:
      return "dual_pass";
  }
  return "regular";
}

Strategy parse_strategy(const std::string& name) {
  if (name == "greedy") return Strategy::greedy;
  if (name == "nucleus") return Strategy::nucleus;
  throw ConfigError("unknown strategy '" + name + "' (expected greedy or nucleus)");
}

DecodeMode parse_mode(const std::string& name) {
  if (name == "regular") return DecodeMode::regular;
  if (name == "ecd") return DecodeMode::ecd;
  if (name == "dual_pass" || name == "dual_pass_baseline") return DecodeMode::dual_pass_baseline;
  throw ConfigError("unknown decoding mode '" + name + "' (expected regular, ecd or dual_pass)");
}

void DecodeConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("decode config: " + what); };
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) fail("alpha must be >= 0");
  if (!(beta >= 0.0 && beta <= 1.0)) fail("beta must lie in [0, 1]");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) fail("gamma must be >= 0");
  if (!(top_p > 0.0 && top_p <= 1.0)) fail("top_p must lie in (0, 1]");
  if (!(temperature > 0.0) || !std::isfinite(temperature)) fail("temperature must be > 0");
  if (max_length < 1) fail("max_length must be positive");
  if (min_length < 0) fail("min_length must be non-negative");
  if (min_length > max_length) fail("min_length exceeds max_length");
  if (!(tau >= 0.0 && tau <= 1.0)) fail("tau must lie in [0, 1]");
  if (!std::isfinite(length_penalty)) fail("length_penalty must be finite");
  if (!(noise_scale >= 0.0)) fail("noise_scale must be >= 0");
}

void to_json(nlohmann::json& j, const DecodeConfig& c) {
  j = nlohmann::json{{"strategy", to_string(c.strategy)},
                     {"mode", to_string(c.mode)},
                     {"alpha", c.alpha},
                     {"beta", c.beta},
                     {"gamma", c.gamma},
                     {"top_p", c.top_p},
                     {"temperature", c.temperature},
                     {"max_length", c.max_length},
                     {"min_length", c.min_length},
                     {"seed", c.seed},
                     {"tau", c.tau},
                     {"length_penalty", c.length_penalty},
                     {"full_kl", c.full_kl},
                     {"noise_seed", c.noise_seed},
                     {"noise_scale", c.noise_scale},
                     {"record_distributions", c.record_distributions}};
}

void from_json(const nlohmann::json& j, DecodeConfig& c) {
  if (!j.is_object()) throw ConfigError("decode config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "strategy") {
      c.strategy = parse_strategy(value.get<std::string>());
    } else if (key == "mode") {
      c.mode = parse_mode(value.get<std::string>());
    } else if (key == "alpha") {
      c.alpha = value.get<double>();
    } else if (key == "beta") {
      c.beta = value.get<double>();
    } else if (key == "gamma") {
      c.gamma = value.get<double>();
    } else if (key == "top_p") {
      c.top_p = value.get<double>();
    } else if (key == "temperature") {
      c.temperature = value.get<double>();
    } else if (key == "max_length") {
      c.max_length = value.get<int>();
    } else if (key == "min_length") {
      c.min_length = value.get<int>();
    } else if (key == "seed") {
      c.seed = value.get<std::uint64_t>();
    } else if (key == "tau") {
      c.tau = value.get<double>();
    } else if (key == "length_penalty") {
      c.length_penalty = value.get<double>();
    } else if (key == "full_kl") {
      c.full_kl = value.get<bool>();
    } else if (key == "noise_seed") {
      c.noise_seed = value.get<std::uint64_t>();
    } else if (key == "noise_scale") {
      c.noise_scale = value.get<double>();
    } else if (key == "record_distributions") {
      c.record_distributions = value.get<bool>();
    } else {
      throw ConfigError("decode config: unknown key '" + key + "'");
    }
  }
}

}  // namespace ecd::decoding
