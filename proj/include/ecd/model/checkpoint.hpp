// Copyright (C) 2026 The ECD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ecd/model/config.hpp"

namespace ecd::model {

struct Tensor {
  std::vector<std::int64_t> shape;
  std::vector<float> values;

  bool operator==(const Tensor&) const = default;
};

/// Model parameters as named flat float32 arrays plus the config they
/// were built for. Immutable once loaded; share freely.
struct Checkpoint {
  ModelConfig config;
  std::map<std::string, Tensor> tensors;

  const Tensor& at(const std::string& name) const;
  Tensor& at(const std::string& name);

  /// Throws DataError if a tensor is missing, extra, or mis-shaped.
  void validate() const;

  bool operator==(const Checkpoint&) const = default;
};

inline constexpr const char* kCheckpointMagic = "ECD-CHECKPOINT v1";

/// Deterministic initialization from config.seed.
Checkpoint init_model(const ModelConfig& config);

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// In-memory forms of the file format.
std::string serialize_checkpoint(const Checkpoint& checkpoint);
Checkpoint parse_checkpoint(std::string_view bytes);

}  // namespace ecd::model
