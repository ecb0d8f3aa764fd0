// Copyright (C) 2026 The ECD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

namespace ecd {

using TensorData = std::variant<std::vector<float>, std::vector<double>, std::vector<std::int32_t>>;

struct NamedTensor {
  std::string name;
  std::vector<std::int64_t> shape;
  TensorData data;
};

/// Container shared by model checkpoints and detector files.
///
/// Layout: a textual header
///
///     <magic>
///     meta <single-line JSON>
///     tensors <count>
///     <name> <f32|f64|i32> <ndim> <dim...> <byte offset> <element count>
///     ...
///     end
///
/// followed by the raw little-endian payload. Offsets are relative to the
/// first byte after the "end" line.
struct TensorFile {
  std::string magic;
  nlohmann::json meta = nlohmann::json::object();
  std::vector<NamedTensor> tensors;

  const NamedTensor* find(std::string_view name) const;
};

std::int64_t element_count(const std::vector<std::int64_t>& shape);

void write_tensor_file(const std::filesystem::path& path, const TensorFile& file);
std::string serialize_tensor_file(const TensorFile& file);

/// Throws ParseError on malformed input and DataError on a payload that
/// disagrees with the header; messages name the offending tensor.
TensorFile read_tensor_file(const std::filesystem::path& path, std::string_view expected_magic);
TensorFile parse_tensor_file(std::string_view bytes, std::string_view expected_magic);

}  // namespace ecd
