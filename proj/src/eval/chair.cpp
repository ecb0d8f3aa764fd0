// Copyright (C) 2026 The ECD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "ecd/eval/chair.hpp"

#include "ecd/core/error.hpp"

namespace ecd::eval {

std::set<std::string> extract_objects(std::span<const std::string> tokens, const SynonymMap& synonyms) {
  std::set<std::string> out;
  for (const auto& t : tokens) {
    if (auto c = synonyms.lookup(t)) out.insert(*c);
  }
  return out;
}

CaptionEvalResult evaluate_caption(std::span<const std::string> tokens, const std::set<std::string>& truth,
                                   const SynonymMap& synonyms) {
  CaptionEvalResult r;
  r.mentioned = extract_objects(tokens, synonyms);
  for (const auto& o : r.mentioned) (truth.contains(o) ? r.covered : r.hallucinated).insert(o);
  return r;
}

ChairReport chair_metrics(std::span<const CaptionInput> captions, const SynonymMap& synonyms) {
  if (captions.empty()) throw DataError("CHAIR needs at least one caption");
  ChairReport r;
  double length = 0.0;
  for (const auto& c : captions) {
    const auto e = evaluate_caption(c.tokens, c.truth, synonyms);
    r.mentioned += static_cast<int>(e.mentioned.size());
    r.hallucinated += static_cast<int>(e.hallucinated.size());
    r.covered += static_cast<int>(e.covered.size());
    r.labeled += static_cast<int>(c.truth.size());
    if (!e.hallucinated.empty()) ++r.captions_with_hallucination;
    length += static_cast<double>(c.tokens.size());
  }
  r.captions = static_cast<int>(captions.size());
  if (r.labeled == 0) throw UndefinedMetricError("coverage undefined: no labelled objects");
  r.no_mentions = r.mentioned == 0;
  r.chair_i = r.no_mentions ? 0.0 : static_cast<double>(r.hallucinated) / r.mentioned;
  r.chair_s = static_cast<double>(r.captions_with_hallucination) / r.captions;
  r.coverage = static_cast<double>(r.covered) / r.labeled;
  r.mean_length = length / r.captions;
  return r;
}

nlohmann::json to_json(const ChairReport& r) {
  return {{"chair_i", r.chair_i},
          {"chair_s", r.chair_s},
          {"coverage", r.coverage},
          {"captions", r.captions},
          {"mentioned", r.mentioned},
          {"hallucinated", r.hallucinated},
          {"captions_with_hallucination", r.captions_with_hallucination},
          {"labeled", r.labeled},
          {"covered", r.covered},
          {"no_mentions", r.no_mentions},
          {"mean_length", r.mean_length}};
}

std::vector<TokenLabel> label_tokens(std::span<const std::string> tokens, const std::set<std::string>& truth,
                                     const SynonymMap& synonyms) {
  std::vector<TokenLabel> out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (auto c = synonyms.lookup(tokens[i])) {
      out.push_back({static_cast<int>(i), *c, truth.contains(*c) ? 0 : 1});
    }
  }
  return out;
}

}  // namespace ecd::eval
