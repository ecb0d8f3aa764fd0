// Copyright (C) 2026 The ECD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "ecd/eval/pope.hpp"

#include <algorithm>
#include <map>

#include "ecd/core/error.hpp"
#include "ecd/core/log.hpp"
#include "ecd/core/random.hpp"
#include "ecd/model/tokenizer.hpp"

namespace ecd::eval {
namespace {

// Objects sorted by descending score, ties alphabetical.
std::vector<std::string> rank(const std::vector<std::string>& names, const std::map<std::string, double>& score) {
  std::vector<std::string> out = names;
  std::stable_sort(out.begin(), out.end(), [&](const std::string& a, const std::string& b) {
    const double sa = score.count(a) ? score.at(a) : 0.0;
    const double sb = score.count(b) ? score.at(b) : 0.0;
    if (sa != sb) return sa > sb;
    return a < b;
  });
  return out;
}

std::vector<std::string> sample(std::vector<std::string> pool, int k, Rng& rng) {
  rng.shuffle(pool.begin(), pool.end());
  if (static_cast<int>(pool.size()) > k) pool.resize(static_cast<std::size_t>(k));
  return pool;
}

}  // namespace

std::string to_string(PopeStrategy s) {
  switch (s) {
    case PopeStrategy::random:
      return "random";
    case PopeStrategy::popular:
      return "popular";
    case PopeStrategy::adversarial:
      return "adversarial";
  }
  return "random";
}

PopeStrategy parse_pope_strategy(const std::string& name) {
  if (name == "random") return PopeStrategy::random;
  if (name == "popular") return PopeStrategy::popular;
  if (name == "adversarial") return PopeStrategy::adversarial;
  throw ConfigError("unknown POPE strategy '" + name + "' (expected random, popular or adversarial)");
}

std::map<std::string, int> object_frequencies(std::span<const AnnotatedRecord> records) {
  std::map<std::string, int> freq;
  for (const auto& r : records) {
    for (const auto& o : r.objects) ++freq[o];
  }
  return freq;
}

std::vector<PopeQuestion> build_pope_questions(std::span<const AnnotatedRecord> records,
                                               const std::set<std::string>& objects, PopeStrategy strategy, int k,
                                               std::uint64_t seed) {
  if (k < 1) throw ConfigError("POPE needs k >= 1");
  std::map<std::string, double> freq;
  for (const auto& [name, n] : object_frequencies(records)) freq[name] = n;
  std::map<std::pair<std::string, std::string>, int> cooc;
  if (strategy == PopeStrategy::adversarial) {
    for (const auto& r : records) {
      for (const auto& a : r.objects) {
        for (const auto& b : r.objects) {
          if (a != b) ++cooc[{a, b}];
        }
      }
    }
  }

  std::vector<PopeQuestion> out;
  int short_records = 0;
  for (std::size_t idx = 0; idx < records.size(); ++idx) {
    const auto& r = records[idx];
    Rng rng(derive_seed(seed, idx));
    const std::set<std::string> truth(r.objects.begin(), r.objects.end());
    std::vector<std::string> absent;
    for (const auto& o : objects) {
      if (!truth.contains(o)) absent.push_back(o);
    }

    const auto positives = sample(std::vector<std::string>(truth.begin(), truth.end()), k, rng);
    std::vector<std::string> negatives;
    switch (strategy) {
      case PopeStrategy::random:
        negatives = sample(absent, k, rng);
        break;
      case PopeStrategy::popular:
        negatives = rank(absent, freq);
        break;
      case PopeStrategy::adversarial: {
        std::map<std::string, double> score;
        for (const auto& o : absent) {
          // Co-occurrence first; corpus frequency only breaks ties.
          double s = 0.0;
          for (const auto& g : truth) {
            auto it = cooc.find({o, g});
            if (it != cooc.end()) s += it->second;
          }
          score[o] = s + (freq.count(o) ? freq.at(o) : 0.0) * 1e-6;
        }
        negatives = rank(absent, score);
        break;
      }
    }
    if (static_cast<int>(negatives.size()) > k) negatives.resize(static_cast<std::size_t>(k));
    if (static_cast<int>(positives.size()) < k || static_cast<int>(negatives.size()) < k) ++short_records;

    for (const auto& o : positives) out.push_back({r.record_id, o, true, strategy});
    for (const auto& o : negatives) out.push_back({r.record_id, o, false, strategy});
  }
  if (short_records > 0) {
    log_warning(std::to_string(short_records) + " record(s) had fewer than " + std::to_string(k) +
                " eligible positive or negative objects");
  }
  return out;
}

PopeReport pope_evaluate(std::span<const PopeQuestion> questions, std::span<const bool> answers_yes) {
  if (questions.size() != answers_yes.size()) throw DataError("every POPE question needs exactly one answer");
  if (questions.empty()) throw DataError("no POPE questions to evaluate");
  PopeReport r;
  int yes = 0;
  for (std::size_t i = 0; i < questions.size(); ++i) {
    const bool truth = questions[i].positive;
    const bool said = answers_yes[i];
    yes += said;
    if (truth && said) ++r.tp;
    if (!truth && said) ++r.fp;
    if (!truth && !said) ++r.tn;
    if (truth && !said) ++r.fn;
  }
  r.questions = static_cast<int>(questions.size());
  r.accuracy = static_cast<double>(r.tp + r.tn) / r.questions;
  r.yes_ratio = static_cast<double>(yes) / r.questions;
  r.precision_undefined = r.tp + r.fp == 0;
  r.recall_undefined = r.tp + r.fn == 0;
  r.precision = r.precision_undefined ? 0.0 : static_cast<double>(r.tp) / (r.tp + r.fp);
  r.recall = r.recall_undefined ? 0.0 : static_cast<double>(r.tp) / (r.tp + r.fn);
  r.f1 = r.precision + r.recall > 0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  return r;
}

nlohmann::json to_json(const PopeReport& r) {
  return {{"accuracy", r.accuracy},
          {"precision", r.precision},
          {"recall", r.recall},
          {"f1", r.f1},
          {"yes_ratio", r.yes_ratio},
          {"questions", r.questions},
          {"tp", r.tp},
          {"fp", r.fp},
          {"tn", r.tn},
          {"fn", r.fn},
          {"precision_undefined", r.precision_undefined},
          {"recall_undefined", r.recall_undefined}};
}

bool parse_yes(std::span<const std::string> tokens) {
  static const std::set<std::string> filler{"well", "so", "um", "uh", "oh", "i", "think", "the", "answer", "is",
                                            ",",    ".",  ":",  "!"};
  static const std::set<std::string> affirmative{"yes", "yeah", "yep", "sure", "correct", "true", "affirmative"};
  for (const auto& t : tokens) {
    const std::string w = model::to_lower(t);
    if (filler.contains(w)) continue;
    return affirmative.contains(w);
  }
  return false;
}

MmeReport mme_score(std::span<const MmeAnswer> answers) {
  std::map<std::string, std::vector<const MmeAnswer*>> by_image;
  for (const auto& a : answers) by_image[a.image_id].push_back(&a);
  if (by_image.empty()) throw DataError("no MME answers to score");
  int correct = 0, both = 0;
  for (const auto& [image, list] : by_image) {
    if (list.size() != 2 || list[0]->positive == list[1]->positive) {
      throw DataError("image '" + image + "' needs exactly one positive and one negative question");
    }
    const bool c0 = list[0]->answered_yes == list[0]->positive;
    const bool c1 = list[1]->answered_yes == list[1]->positive;
    correct += c0 + c1;
    both += c0 && c1;
  }
  MmeReport r;
  r.images = static_cast<int>(by_image.size());
  r.accuracy = 100.0 * correct / (2.0 * r.images);
  r.accuracy_plus = 100.0 * both / r.images;
  r.combined = r.accuracy + r.accuracy_plus;
  return r;
}

nlohmann::json to_json(const MmeReport& r) {
  return {{"accuracy", r.accuracy}, {"accuracy_plus", r.accuracy_plus}, {"combined", r.combined}, {"images", r.images}};
}

nlohmann::json to_json(const PopeQuestion& q) {
  return {{"record_id", q.record_id}, {"object", q.object}, {"positive", q.positive}, {"strategy", to_string(q.strategy)}};
}

PopeQuestion question_from_json(const nlohmann::json& j) {
  try {
    return {j.at("record_id").get<std::string>(), j.at("object").get<std::string>(), j.at("positive").get<bool>(),
            parse_pope_strategy(j.at("strategy").get<std::string>())};
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("POPE question: ") + e.what());
  }
}

}  // namespace ecd::eval
