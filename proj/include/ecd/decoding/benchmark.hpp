// Copyright (C) 2026 The ECD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "ecd/decoding/generate.hpp"

namespace ecd::decoding {

struct ModeTiming {
  DecodeMode mode = DecodeMode::regular;
  int responses = 0;
  long steps = 0;
  /// Wall time per generated token (EOS step included).
  double mean_token_ns = 0, median_token_ns = 0;
  double mean_response_ns = 0, median_response_ns = 0;
  /// Per-step split of the wall time.
  double mean_model_ns = 0, mean_classifier_ns = 0;
  double forwards_per_step = 0, classifier_calls_per_step = 0;
};

struct LatencyReport {
  int prompts = 0;
  DecodeConfig config;
  std::vector<ModeTiming> modes;

  const ModeTiming* find(DecodeMode mode) const;
};

/// Generates every prompt in every mode (interleaved per prompt, after one
/// discarded warm-up round) and aggregates the timings. Needs >= 10 prompts
/// and a detector when ecd is among the modes.
template <typename Scalar>
LatencyReport benchmark_latency(const model::Transformer<Scalar>& model, const detector::Detector* detector,
                                const std::vector<model::PromptState>& prompts, const DecodeConfig& config,
                                const std::vector<DecodeMode>& modes = {DecodeMode::regular, DecodeMode::ecd,
                                                                        DecodeMode::dual_pass_baseline});

/// Fixed-width text table, one row per mode.
std::string format_report(const LatencyReport& report);
nlohmann::json report_to_json(const LatencyReport& report);

}  // namespace ecd::decoding
