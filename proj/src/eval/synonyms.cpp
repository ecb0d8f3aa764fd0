// Copyright (C) 2026 The ECD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "ecd/eval/synonyms.hpp"

#include <fstream>
#include <sstream>

#include "ecd/core/error.hpp"
#include "ecd/model/tokenizer.hpp"

namespace ecd::eval {

void SynonymMap::add(const std::string& surface, const std::string& canonical) {
  const std::string s = model::to_lower(surface);
  const std::string c = model::to_lower(canonical);
  if (s.empty() || c.empty()) throw DataError("synonym entries must be non-empty");
  for (const auto& [key, value] : {std::pair{s, c}, std::pair{c, c}}) {
    auto [it, inserted] = map_.emplace(key, value);
    if (!inserted && it->second != value) {
      throw DataError("synonym '" + key + "' maps to both '" + it->second + "' and '" + value + "'");
    }
  }
  canonicals_.insert(c);
}

std::optional<std::string> SynonymMap::lookup(std::string_view token) const {
  auto it = map_.find(model::to_lower(token));
  if (it == map_.end()) return std::nullopt;
  return it->second;
}

void SynonymMap::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& [surface, canonical] : map_) out << surface << ' ' << canonical << '\n';
  if (!out) throw DataError("failed writing " + path.string());
}

SynonymMap SynonymMap::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  SynonymMap m;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string surface, canonical, extra;
    if (!(fields >> surface)) continue;
    if (!(fields >> canonical) || (fields >> extra)) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected two columns");
    }
    m.add(surface, canonical);
  }
  return m;
}

}  // namespace ecd::eval
