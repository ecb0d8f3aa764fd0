// Copyright (C) 2026 The ECD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ecd::model {

inline constexpr int kPadId = 0;
inline constexpr int kBosId = 1;
inline constexpr int kEosId = 2;
inline constexpr int kUnkId = 3;

/// Whitespace word-level tokenizer over a closed vocabulary. Ids 0..3 are
/// reserved for <pad>, <bos>, <eos>, <unk>.
class Vocabulary {
 public:
  Vocabulary();
  /// Reserved tokens are prepended; duplicates are rejected.
  explicit Vocabulary(const std::vector<std::string>& words);

  int size() const { return static_cast<int>(tokens_.size()); }
  int id(std::string_view token) const;  // kUnkId when absent
  bool contains(std::string_view token) const;
  const std::string& token(int id) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  /// Lowercases and splits on whitespace.
  std::vector<int> encode(std::string_view text) const;
  /// Joins tokens with single spaces, dropping <pad>/<bos>/<eos>.
  std::string decode(const std::vector<int>& ids) const;

  /// One token per line; the line number is the id.
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

 private:
  void add(const std::string& token);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

std::vector<std::string> split_words(std::string_view text);
std::string to_lower(std::string_view text);

}  // namespace ecd::model
