// Copyright (C) 2026 The ECD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "ecd/model/checkpoint.hpp"

#include <cmath>

#include "ecd/core/error.hpp"
#include "ecd/core/random.hpp"
#include "ecd/core/tensor_file.hpp"

namespace ecd::model {
namespace {

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

const Tensor& Checkpoint::at(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw DataError("checkpoint has no tensor '" + name + "'");
  return it->second;
}

Tensor& Checkpoint::at(const std::string& name) {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw DataError("checkpoint has no tensor '" + name + "'");
  return it->second;
}

void Checkpoint::validate() const {
  const auto shapes = expected_shapes(config);
  for (const auto& [name, shape] : shapes) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw DataError("checkpoint is missing tensor '" + name + "'");
    if (it->second.shape != shape) {
      throw DataError("tensor '" + name + "' has a shape inconsistent with the model config");
    }
    if (static_cast<std::int64_t>(it->second.values.size()) != element_count(shape)) {
      throw DataError("tensor '" + name + "' element count does not match its shape");
    }
  }
  for (const auto& [name, tensor] : tensors) {
    if (!shapes.contains(name)) throw DataError("unexpected tensor '" + name + "' in checkpoint");
  }
}

Checkpoint init_model(const ModelConfig& config) {
  config.validate();
  Checkpoint cp;
  cp.config = config;
  Rng rng(config.seed);
  const double base_std = 0.02;
  const double residual_std = base_std / std::sqrt(2.0 * config.n_layers);
  for (const auto& [name, shape] : expected_shapes(config)) {
    Tensor t;
    t.shape = shape;
    t.values.assign(static_cast<std::size_t>(element_count(shape)), 0.0f);
    if (ends_with(name, ".gain")) {
      std::fill(t.values.begin(), t.values.end(), 1.0f);
    } else if (!ends_with(name, ".bias")) {
      const bool residual = ends_with(name, "attn.out.weight") || ends_with(name, "mlp.down.weight");
      const double stddev = residual ? residual_std : base_std;
      for (auto& v : t.values) v = static_cast<float>(stddev * rng.normal());
    }
    cp.tensors.emplace(name, std::move(t));
  }
  return cp;
}

std::string serialize_checkpoint(const Checkpoint& cp) {
  TensorFile file;
  file.magic = kCheckpointMagic;
  file.meta["config"] = cp.config;
  for (const auto& [name, t] : cp.tensors) file.tensors.push_back({name, t.shape, t.values});
  return serialize_tensor_file(file);
}

namespace {

Checkpoint from_tensor_file(const TensorFile& file) {
  Checkpoint cp;
  if (!file.meta.contains("config")) throw ParseError("checkpoint header has no config");
  try {
    cp.config = file.meta.at("config").get<ModelConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed checkpoint config: ") + e.what());
  }
  try {
    cp.config.validate();
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint config invalid: ") + e.what());
  }
  for (const auto& t : file.tensors) {
    const auto* values = std::get_if<std::vector<float>>(&t.data);
    if (values == nullptr) throw DataError("tensor '" + t.name + "' is not float32");
    cp.tensors.emplace(t.name, Tensor{t.shape, *values});
  }
  cp.validate();
  return cp;
}

}  // namespace

Checkpoint parse_checkpoint(std::string_view bytes) {
  return from_tensor_file(parse_tensor_file(bytes, kCheckpointMagic));
}

void save_checkpoint(const Checkpoint& cp, const std::filesystem::path& path) {
  TensorFile file;
  file.magic = kCheckpointMagic;
  file.meta["config"] = cp.config;
  for (const auto& [name, t] : cp.tensors) file.tensors.push_back({name, t.shape, t.values});
  write_tensor_file(path, file);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return from_tensor_file(read_tensor_file(path, kCheckpointMagic));
}

}  // namespace ecd::model
