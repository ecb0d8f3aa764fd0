// Copyright (C) 2026 The ECD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

namespace ecd::decoding {

enum class Strategy { greedy, nucleus };
enum class DecodeMode { regular, ecd, dual_pass_baseline };

std::string to_string(Strategy s);
std::string to_string(DecodeMode m);
Strategy parse_strategy(const std::string& name);
DecodeMode parse_mode(const std::string& name);

struct DecodeConfig {
  Strategy strategy = Strategy::nucleus;
  DecodeMode mode = DecodeMode::regular;
  /// Weight of the hallucination-score correction in ecd mode.
  double alpha = 1.0;
  /// Plausibility cut: keep tokens with p >= beta * max p.
  double beta = 0.1;
  /// Contrast weight of the dual-pass baseline.
  double gamma = 1.0;
  double top_p = 0.9;
  double temperature = 1.0;
  /// Maximum number of generated tokens, EOS included.
  int max_length = 256;
  /// EOS is suppressed until this many tokens have been generated.
  int min_length = 1;
  std::uint64_t seed = 0;
  /// Threshold reported with ecd steps (p_f >= tau counts as flagged).
  double tau = 0.5;
  /// Sequence-score exponent and divergence variant for the feature extractor.
  double length_penalty = 1.0;
  bool full_kl = false;
  /// Visual-noise stream of the dual-pass baseline.
  std::uint64_t noise_seed = 0x5eed;
  double noise_scale = 1.0;
  /// Store full per-step distributions in the record (large).
  bool record_distributions = false;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

void to_json(nlohmann::json& j, const DecodeConfig& c);
/// Missing keys keep their defaults; unknown keys are rejected.
void from_json(const nlohmann::json& j, DecodeConfig& c);

}  // namespace ecd::decoding
