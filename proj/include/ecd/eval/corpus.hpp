// Copyright (C) 2026 The ECD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ecd/core/random.hpp"
#include "ecd/eval/synonyms.hpp"
#include "ecd/model/tokenizer.hpp"
#include "ecd/model/trace.hpp"
#include "ecd/model/trainer.hpp"

namespace ecd::eval {

/// One object class of the synthetic world.
struct ObjectInfo {
  std::string name;
  std::vector<std::string> surface_forms;  // the first is the canonical name
  int scene = 0;
};

/// The fixed toy world: 40 objects in 6 scenes. Visual slot 0 is background,
/// slots 1..40 are the objects in inventory order, then one slot per scene.
const std::vector<ObjectInfo>& object_inventory();
const std::vector<std::string>& scene_names();
int object_slot(const std::string& canonical);  // throws DataError if unknown
int scene_slot(int scene);
int required_visual_slots();

SynonymMap inventory_synonyms();

struct AnnotatedRecord {
  std::string record_id;
  std::uint64_t visual_seed = 0;
  int scene = 0;
  std::vector<std::string> objects;  // canonical, sorted
  std::string split;                 // "train" or "eval"
  std::vector<std::string> reference_caption;

  bool operator==(const AnnotatedRecord&) const = default;
};

nlohmann::json to_json(const AnnotatedRecord& r);
AnnotatedRecord record_from_json(const nlohmann::json& j);
void write_records(const std::filesystem::path& path, std::span<const AnnotatedRecord> records);
std::vector<AnnotatedRecord> read_records(const std::filesystem::path& path);
std::vector<AnnotatedRecord> select_split(std::span<const AnnotatedRecord> records, const std::string& split);

struct CorpusConfig {
  int n_records = 500;
  double eval_fraction = 0.2;
  int min_objects = 2;
  int max_objects = 6;
  /// Probability that an object is drawn from outside the record's scene.
  double off_scene_rate = 0.15;
  std::uint64_t seed = 0;
};

struct Corpus {
  std::vector<AnnotatedRecord> records;
  SynonymMap synonyms;
  model::Vocabulary vocab;
};

/// Deterministic in the config. The first (1 - eval_fraction) share of
/// records (after a seeded shuffle) is "train", the rest "eval".
Corpus make_corpus(const CorpusConfig& config);

/// Closed vocabulary covering every template, question and surface form.
model::Vocabulary corpus_vocabulary();

/// Object slots plus the scene slot, padded with background and shuffled by
/// the record's visual seed.
std::vector<int> visual_prefix(const AnnotatedRecord& record, int n_visual_tokens);

std::vector<std::string> caption_query();
std::vector<std::string> pope_query(const std::string& object_surface);

/// BOS followed by the encoded query words.
model::PromptState make_prompt(const AnnotatedRecord& record, const std::vector<std::string>& query,
                               const model::Vocabulary& vocab, int n_visual_tokens);

/// A templated caption listing `objects` in the given order with a random
/// template and random surface forms.
std::vector<std::string> render_caption(const std::vector<std::string>& objects, Rng& rng);

struct TrainingDataConfig {
  int captions_per_record = 8;
  int questions_per_record = 4;
  /// Probability that a training caption mentions one absent object from
  /// the record's scene. This plants hallucinations in the fitted model.
  double hallucination_rate = 0.3;
  std::uint64_t seed = 0;
};

std::vector<model::TrainingExample> make_training_examples(std::span<const AnnotatedRecord> records,
                                                           const model::Vocabulary& vocab,
                                                           const TrainingDataConfig& config, int n_visual_tokens);

}  // namespace ecd::eval
