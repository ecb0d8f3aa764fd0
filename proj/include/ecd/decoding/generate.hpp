// Copyright (C) 2026 The ECD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ecd/decoding/config.hpp"
#include "ecd/detector/detector.hpp"
#include "ecd/features/features.hpp"
#include "ecd/model/trace.hpp"
#include "ecd/model/transformer.hpp"

namespace ecd::decoding {

/// Hallucination scores of each candidate as if it were the next token.
/// Token-dependent features are evaluated per candidate; trace-level ones are
/// shared. Throws DataError when the detector schema does not fit the trace.
Eigen::VectorXd score_candidates(const model::ForwardTrace& trace, const features::GenerationHistory& history,
                                 const detector::Detector& detector, std::span<const int> candidates,
                                 const features::FeatureOptions& options = {});

struct StepRecord {
  int step = 0;
  int token = 0;
  /// p_theta of the chosen token (after temperature).
  double p_theta = 0.0;
  /// Probability the sampling distribution gave the chosen token.
  double p_sample = 0.0;
  std::vector<int> candidates;
  /// Aligned with candidates; empty outside ecd mode.
  std::vector<double> halluc_scores;
  /// Score of the chosen token (ecd mode), else -1.
  double chosen_score = -1.0;
  int forwards = 0;
  std::int64_t model_ns = 0;
  std::int64_t classifier_ns = 0;
  /// Only when DecodeConfig::record_distributions is set.
  std::vector<double> original_dist, final_dist;
};

struct GenerationRecord {
  std::string id;
  DecodeConfig config;
  std::vector<int> visual_prefix_ids;
  std::vector<int> query_ids;
  /// Generated ids without the terminating EOS.
  std::vector<int> tokens;
  std::string text;
  /// "eos", "max_length" or "context".
  std::string stop_reason;
  std::vector<StepRecord> steps;
  std::int64_t total_ns = 0;
  int forward_count = 0;
  int classifier_calls = 0;
  /// Caller-supplied annotations (task, question), copied through verbatim.
  nlohmann::json meta;
};

nlohmann::json to_json(const GenerationRecord& r, bool include_steps = true);
GenerationRecord record_from_json(const nlohmann::json& j);

/// Read-only view handed to the step observer before the chosen token is
/// appended to the history.
struct StepView {
  int step;
  int token;
  const model::ForwardTrace& trace;
  const features::GenerationHistory& history;
};
using StepObserver = std::function<void(const StepView&)>;

/// Autoregressive loop until EOS, max_length or the model's context limit.
/// ecd mode requires a detector. An observer forces full traces.
template <typename Scalar>
GenerationRecord generate(const model::Transformer<Scalar>& model, const detector::Detector* detector,
                          const model::PromptState& prompt, const DecodeConfig& config,
                          const StepObserver& observer = {});

/// Contrast of the original and the distorted-prefix distribution, masked
/// to the plausible set of the original. Runs exactly two forwards.
template <typename Scalar>
Eigen::VectorXd dual_pass_baseline_step(const model::Transformer<Scalar>& model, const model::PromptState& state,
                                        const model::PromptState& distorted, double gamma, double beta = 0.0);

}  // namespace ecd::decoding
