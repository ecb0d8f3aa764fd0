// Copyright (C) 2026 The ECD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "ecd/eval/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>

#include "ecd/core/error.hpp"

namespace ecd::eval {
namespace {

const std::vector<std::vector<std::string>> kTemplates = {
    {"a", "photo", "of", "{list}", "."},
    {"there", "is", "{list}", "in", "the", "image", "."},
    {"the", "image", "shows", "{list}", "."},
    {"in", "this", "picture", "i", "can", "see", "{list}", "."},
};

const std::vector<double> kSceneWeights = {0.24, 0.2, 0.18, 0.16, 0.12, 0.1};

// Zipf-like weight of the k-th object (0-based) within its scene.
double zipf(int rank) { return 1.0 / (rank + 1.0); }

std::size_t pick_weighted(const std::vector<double>& w, Rng& rng) {
  double total = 0.0;
  for (double v : w) total += v;
  double u = rng.uniform() * total;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (u < w[i]) return i;
    u -= w[i];
  }
  return w.size() - 1;
}

// Objects of one scene with their within-scene weights.
std::vector<std::pair<int, double>> scene_members(int scene) {
  std::vector<std::pair<int, double>> out;
  const auto& inv = object_inventory();
  int rank = 0;
  for (std::size_t i = 0; i < inv.size(); ++i) {
    if (inv[i].scene == scene) out.emplace_back(static_cast<int>(i), zipf(rank++));
  }
  return out;
}

int draw_object(int scene, bool off_scene, Rng& rng) {
  if (off_scene) {
    std::vector<double> w;
    for (std::size_t s = 0; s < scene_names().size(); ++s) {
      for (const auto& m : scene_members(static_cast<int>(s))) w.push_back(m.second);
    }
    // Inventory order groups objects by scene, so flat indices line up.
    return static_cast<int>(pick_weighted(w, rng));
  }
  const auto members = scene_members(scene);
  std::vector<double> w;
  for (const auto& m : members) w.push_back(m.second);
  return members[pick_weighted(w, rng)].first;
}

const std::string& random_surface(const std::string& canonical, Rng& rng) {
  const auto& forms = object_inventory()[static_cast<std::size_t>(object_slot(canonical) - 1)].surface_forms;
  return forms[rng.uniform_index(forms.size())];
}

std::vector<std::string> render_list(const std::vector<std::string>& surfaces) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < surfaces.size(); ++i) {
    if (i > 0) out.push_back(i + 1 == surfaces.size() ? "and" : ",");
    out.push_back("a");
    out.push_back(surfaces[i]);
  }
  return out;
}

std::vector<int> encode_words(const std::vector<std::string>& words, const model::Vocabulary& vocab) {
  std::vector<int> ids;
  for (const auto& w : words) {
    if (!vocab.contains(w)) throw DataError("word '" + w + "' is not in the vocabulary");
    ids.push_back(vocab.id(w));
  }
  return ids;
}

}  // namespace

const std::vector<ObjectInfo>& object_inventory() {
  static const std::vector<ObjectInfo> inventory = [] {
    const std::vector<std::vector<std::vector<std::string>>> scenes = {
        {{"person", "man", "woman"}, {"car", "automobile"}, {"bus"}, {"truck", "lorry"}, {"bicycle", "bike"},
         {"motorcycle", "motorbike"}, {"hydrant"}},
        {{"cup", "mug"}, {"bowl"}, {"knife"}, {"fork"}, {"oven"}, {"sink"}, {"refrigerator", "fridge"}},
        {{"sofa", "couch"}, {"chair"}, {"television", "tv"}, {"lamp"}, {"book"}, {"clock"}, {"vase"}},
        {{"dog", "puppy"}, {"tree"}, {"bird"}, {"kite"}, {"frisbee"}, {"bench"}, {"ball"}},
        {{"surfboard"}, {"umbrella", "parasol"}, {"boat"}, {"towel"}, {"bottle"}, {"sandwich"}},
        {{"horse", "pony"}, {"cow"}, {"sheep", "lamb"}, {"tractor"}, {"fence"}, {"cat", "kitten"}},
    };
    std::vector<ObjectInfo> out;
    for (std::size_t s = 0; s < scenes.size(); ++s) {
      for (const auto& forms : scenes[s]) out.push_back({forms.front(), forms, static_cast<int>(s)});
    }
    return out;
  }();
  return inventory;
}

const std::vector<std::string>& scene_names() {
  static const std::vector<std::string> names = {"street", "kitchen", "living_room", "park", "beach", "farm"};
  return names;
}

int object_slot(const std::string& canonical) {
  const auto& inv = object_inventory();
  for (std::size_t i = 0; i < inv.size(); ++i) {
    if (inv[i].name == canonical) return static_cast<int>(i) + 1;
  }
  throw DataError("unknown object '" + canonical + "'");
}

int scene_slot(int scene) {
  if (scene < 0 || scene >= static_cast<int>(scene_names().size())) throw DataError("scene index out of range");
  return static_cast<int>(object_inventory().size()) + 1 + scene;
}

int required_visual_slots() { return scene_slot(static_cast<int>(scene_names().size()) - 1) + 1; }

SynonymMap inventory_synonyms() {
  SynonymMap m;
  for (const auto& o : object_inventory()) {
    for (const auto& s : o.surface_forms) m.add(s, o.name);
  }
  return m;
}

nlohmann::json to_json(const AnnotatedRecord& r) {
  return {{"record_id", r.record_id},   {"visual_seed", r.visual_seed}, {"scene", r.scene},
          {"objects", r.objects},       {"split", r.split},             {"reference_caption", r.reference_caption}};
}

AnnotatedRecord record_from_json(const nlohmann::json& j) {
  AnnotatedRecord r;
  try {
    r.record_id = j.at("record_id").get<std::string>();
    r.visual_seed = j.at("visual_seed").get<std::uint64_t>();
    r.scene = j.value("scene", 0);
    r.objects = j.at("objects").get<std::vector<std::string>>();
    r.split = j.value("split", "");
    r.reference_caption = j.value("reference_caption", std::vector<std::string>{});
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("record: ") + e.what());
  }
  return r;
}

void write_records(const std::filesystem::path& path, std::span<const AnnotatedRecord> records) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& r : records) out << to_json(r).dump() << '\n';
  if (!out) throw DataError("failed writing " + path.string());
}

std::vector<AnnotatedRecord> read_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  std::vector<AnnotatedRecord> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const ParseError& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::vector<AnnotatedRecord> select_split(std::span<const AnnotatedRecord> records, const std::string& split) {
  std::vector<AnnotatedRecord> out;
  for (const auto& r : records) {
    if (r.split == split) out.push_back(r);
  }
  return out;
}

model::Vocabulary corpus_vocabulary() {
  std::set<std::string> words;
  for (const auto& t : kTemplates) {
    for (const auto& w : t) {
      if (w != "{list}") words.insert(w);
    }
  }
  for (const auto& w : render_list({"x", "y", "z"})) words.insert(w);
  for (const auto& w : caption_query()) words.insert(w);
  for (const auto& w : pope_query("x")) words.insert(w);
  words.insert("yes");
  words.insert("no");
  words.erase("x");
  words.erase("y");
  words.erase("z");
  for (const auto& o : object_inventory()) words.insert(o.surface_forms.begin(), o.surface_forms.end());
  return model::Vocabulary(std::vector<std::string>(words.begin(), words.end()));
}

Corpus make_corpus(const CorpusConfig& config) {
  if (config.n_records < 2) throw ConfigError("corpus needs at least 2 records");
  if (!(config.eval_fraction > 0.0 && config.eval_fraction < 1.0)) throw ConfigError("eval_fraction must lie in (0, 1)");
  if (config.min_objects < 1 || config.max_objects < config.min_objects || config.max_objects > 7) {
    throw ConfigError("object counts must satisfy 1 <= min_objects <= max_objects <= 7");
  }
  Rng rng(config.seed);
  Corpus c;
  c.synonyms = inventory_synonyms();
  c.vocab = corpus_vocabulary();
  const auto& inv = object_inventory();
  for (int i = 0; i < config.n_records; ++i) {
    AnnotatedRecord r;
    char id[16];
    std::snprintf(id, sizeof id, "r%04d", i);
    r.record_id = id;
    r.visual_seed = rng.next_u64();
    r.scene = static_cast<int>(pick_weighted(kSceneWeights, rng));
    const int n = config.min_objects + static_cast<int>(rng.uniform_index(
                                           static_cast<std::size_t>(config.max_objects - config.min_objects + 1)));
    std::set<std::string> chosen;
    for (int attempt = 0; static_cast<int>(chosen.size()) < n && attempt < 100; ++attempt) {
      const bool off = rng.uniform() < config.off_scene_rate;
      chosen.insert(inv[static_cast<std::size_t>(draw_object(r.scene, off, rng))].name);
    }
    r.objects.assign(chosen.begin(), chosen.end());
    std::vector<std::string> order = r.objects;
    rng.shuffle(order.begin(), order.end());
    r.reference_caption = render_caption(order, rng);
    c.records.push_back(std::move(r));
  }
  std::vector<std::size_t> perm(c.records.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  rng.shuffle(perm.begin(), perm.end());
  const auto n_eval = static_cast<std::size_t>(
      std::max(1.0, std::round(config.eval_fraction * static_cast<double>(c.records.size()))));
  for (std::size_t k = 0; k < perm.size(); ++k) c.records[perm[k]].split = k < perm.size() - n_eval ? "train" : "eval";
  return c;
}

std::vector<int> visual_prefix(const AnnotatedRecord& record, int n_visual_tokens) {
  std::vector<int> slots;
  for (const auto& o : record.objects) slots.push_back(object_slot(o));
  slots.push_back(scene_slot(record.scene));
  if (static_cast<int>(slots.size()) > n_visual_tokens) {
    throw DataError("record " + record.record_id + " has more objects than visual tokens");
  }
  while (static_cast<int>(slots.size()) < n_visual_tokens) slots.push_back(0);
  Rng rng(record.visual_seed);
  rng.shuffle(slots.begin(), slots.end());
  return slots;
}

std::vector<std::string> caption_query() { return {"describe", "the", "image", "."}; }

std::vector<std::string> pope_query(const std::string& object_surface) {
  return {"is", "there", "a", object_surface, "in", "the", "image", "?"};
}

model::PromptState make_prompt(const AnnotatedRecord& record, const std::vector<std::string>& query,
                               const model::Vocabulary& vocab, int n_visual_tokens) {
  model::PromptState s;
  s.visual_prefix_ids = visual_prefix(record, n_visual_tokens);
  s.query_ids.push_back(model::kBosId);
  for (int id : encode_words(query, vocab)) s.query_ids.push_back(id);
  return s;
}

std::vector<std::string> render_caption(const std::vector<std::string>& objects, Rng& rng) {
  std::vector<std::string> surfaces;
  for (const auto& o : objects) surfaces.push_back(random_surface(o, rng));
  const auto& tmpl = kTemplates[rng.uniform_index(kTemplates.size())];
  std::vector<std::string> out;
  for (const auto& w : tmpl) {
    if (w == "{list}") {
      const auto list = render_list(surfaces);
      out.insert(out.end(), list.begin(), list.end());
    } else {
      out.push_back(w);
    }
  }
  return out;
}

std::vector<model::TrainingExample> make_training_examples(std::span<const AnnotatedRecord> records,
                                                           const model::Vocabulary& vocab,
                                                           const TrainingDataConfig& config, int n_visual_tokens) {
  Rng rng(config.seed);
  const auto& inv = object_inventory();
  std::vector<model::TrainingExample> out;
  auto add = [&](const AnnotatedRecord& r, const std::vector<std::string>& query,
                 const std::vector<std::string>& answer) {
    model::TrainingExample ex;
    ex.visual_prefix_ids = visual_prefix(r, n_visual_tokens);
    ex.tokens.push_back(model::kBosId);
    for (int id : encode_words(query, vocab)) ex.tokens.push_back(id);
    ex.first_target = static_cast<int>(ex.tokens.size());
    for (int id : encode_words(answer, vocab)) ex.tokens.push_back(id);
    ex.tokens.push_back(model::kEosId);
    out.push_back(std::move(ex));
  };

  for (const auto& r : records) {
    const std::set<std::string> truth(r.objects.begin(), r.objects.end());
    std::vector<std::string> absent_in_scene, absent;
    for (const auto& o : inv) {
      if (truth.contains(o.name)) continue;
      absent.push_back(o.name);
      if (o.scene == r.scene) absent_in_scene.push_back(o.name);
    }
    for (int k = 0; k < config.captions_per_record; ++k) {
      std::vector<std::string> order = r.objects;
      rng.shuffle(order.begin(), order.end());
      if (!absent_in_scene.empty() && rng.uniform() < config.hallucination_rate) {
        const auto& extra = absent_in_scene[rng.uniform_index(absent_in_scene.size())];
        order.insert(order.begin() + static_cast<std::ptrdiff_t>(rng.uniform_index(order.size() + 1)), extra);
      }
      add(r, caption_query(), render_caption(order, rng));
    }
    for (int k = 0; k < config.questions_per_record; ++k) {
      const bool positive = k % 2 == 0;
      std::string object;
      if (positive) {
        object = r.objects[rng.uniform_index(r.objects.size())];
      } else {
        // Half of the negatives come from the record's own scene.
        const auto& pool = (!absent_in_scene.empty() && rng.uniform() < 0.5) ? absent_in_scene : absent;
        object = pool[rng.uniform_index(pool.size())];
      }
      add(r, pope_query(random_surface(object, rng)), {positive ? "yes" : "no"});
    }
  }
  return out;
}

}  // namespace ecd::eval
