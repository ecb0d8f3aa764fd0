// Copyright (C) 2026 The ECD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ecd/eval/corpus.hpp"

namespace ecd::eval {

enum class PopeStrategy { random, popular, adversarial };

std::string to_string(PopeStrategy s);
PopeStrategy parse_pope_strategy(const std::string& name);

struct PopeQuestion {
  std::string record_id;
  std::string object;
  bool positive = false;
  PopeStrategy strategy = PopeStrategy::random;
};

/// Per record: up to k ground-truth objects (positives) and k absent objects
/// (negatives). Negatives are uniform for random, the most frequent absent
/// objects for popular, and the absent objects co-occurring most often with
/// the record's objects for adversarial. Frequencies and co-occurrences are
/// counted over `records`; ties go to the alphabetically first name.
std::vector<PopeQuestion> build_pope_questions(std::span<const AnnotatedRecord> records,
                                               const std::set<std::string>& objects, PopeStrategy strategy,
                                               int k = 3, std::uint64_t seed = 0);

/// Number of records containing each object.
std::map<std::string, int> object_frequencies(std::span<const AnnotatedRecord> records);

struct PopeReport {
  double accuracy = 0, precision = 0, recall = 0, f1 = 0;
  double yes_ratio = 0;
  int questions = 0, tp = 0, fp = 0, tn = 0, fn = 0;
  /// Set when a ratio had a zero denominator and was reported as 0.
  bool precision_undefined = false, recall_undefined = false;
};

/// Positive class is "yes". answers[i] answers questions[i].
PopeReport pope_evaluate(std::span<const PopeQuestion> questions, std::span<const bool> answers_yes);
nlohmann::json to_json(const PopeReport& r);

/// Yes iff the first token outside a small filler list is affirmative.
bool parse_yes(std::span<const std::string> tokens);

struct MmeAnswer {
  std::string image_id;
  bool positive = false;  // ground-truth answer is yes
  bool answered_yes = false;
};

struct MmeReport {
  double accuracy = 0;       // percent of questions
  double accuracy_plus = 0;  // percent of images with both answers right
  double combined = 0;       // accuracy + accuracy_plus, in [0, 200]
  int images = 0;
};

/// Needs exactly one positive and one negative question per image.
MmeReport mme_score(std::span<const MmeAnswer> answers);
nlohmann::json to_json(const MmeReport& r);

nlohmann::json to_json(const PopeQuestion& q);
PopeQuestion question_from_json(const nlohmann::json& j);

}  // namespace ecd::eval
