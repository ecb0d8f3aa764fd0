// Copyright (C) 2026 The ECD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>

namespace ecd::eval {

/// Surface-form token -> canonical object name. Every canonical name also
/// maps to itself. Lookups lowercase the token first.
class SynonymMap {
 public:
  /// Throws DataError if `surface` already maps to a different object.
  void add(const std::string& surface, const std::string& canonical);

  std::optional<std::string> lookup(std::string_view token) const;
  bool is_object(std::string_view canonical) const { return canonicals_.contains(std::string(canonical)); }
  const std::set<std::string>& canonical_names() const { return canonicals_; }
  const std::map<std::string, std::string>& entries() const { return map_; }

  /// Two whitespace-separated columns per line: surface canonical.
  void save(const std::filesystem::path& path) const;
  static SynonymMap load(const std::filesystem::path& path);

 private:
  std::map<std::string, std::string> map_;
  std::set<std::string> canonicals_;
};

}  // namespace ecd::eval
