// Copyright (C) 2026 The ECD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ecd/eval/synonyms.hpp"

namespace ecd::eval {

/// Canonical objects whose surface forms occur in the caption (exact token
/// match after lowercasing).
std::set<std::string> extract_objects(std::span<const std::string> tokens, const SynonymMap& synonyms);

struct CaptionEvalResult {
  std::set<std::string> mentioned;
  std::set<std::string> hallucinated;  // mentioned but not in the ground truth
  std::set<std::string> covered;       // mentioned and in the ground truth
};

CaptionEvalResult evaluate_caption(std::span<const std::string> tokens, const std::set<std::string>& truth,
                                   const SynonymMap& synonyms);

struct CaptionInput {
  std::vector<std::string> tokens;
  std::set<std::string> truth;
};

/// Corpus-level CHAIR. Each (caption, object) pair counts once for CHAIR_i;
/// Coverage is the global ratio of ground-truth objects mentioned in their
/// own caption.
struct ChairReport {
  double chair_i = 0.0;
  double chair_s = 0.0;
  double coverage = 0.0;
  int captions = 0;
  int mentioned = 0;
  int hallucinated = 0;
  int captions_with_hallucination = 0;
  int labeled = 0;
  int covered = 0;
  /// Set when no object was mentioned at all (CHAIR_i reported as 0).
  bool no_mentions = false;
  double mean_length = 0.0;
};

/// Throws DataError with no captions, UndefinedMetricError with no labelled objects.
ChairReport chair_metrics(std::span<const CaptionInput> captions, const SynonymMap& synonyms);
nlohmann::json to_json(const ChairReport& r);

struct TokenLabel {
  int index = 0;  // position in the caption
  std::string canonical;
  int label = 0;  // 1 = hallucinated
};

/// Labels for object tokens only: 0 if the object is in the ground truth,
/// 1 otherwise. Other tokens are left out.
std::vector<TokenLabel> label_tokens(std::span<const std::string> tokens, const std::set<std::string>& truth,
                                     const SynonymMap& synonyms);

}  // namespace ecd::eval
