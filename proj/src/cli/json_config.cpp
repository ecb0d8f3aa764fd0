// Copyright (C) 2026 The ECD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "json_config.hpp"

#include <algorithm>

namespace ecd::cli {
namespace {

nlohmann::json typed(const std::string& s) {
  if (s.empty()) return s;
  try {
    auto j = nlohmann::json::parse(s);
    if (j.is_number() || j.is_boolean()) return j;
  } catch (const nlohmann::json::parse_error&) {
  }
  return s;
}

std::string scalar_text(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number() || v.is_null()) return v.dump();
  throw CLI::ConversionError("config values must be scalars or arrays of scalars");
}

bool skipped(const CLI::Option* opt) {
  const auto& names = opt->get_lnames();
  return names.empty() || names.front() == "help" || names.front() == "config";
}

}  // namespace

nlohmann::json options_to_json(const CLI::App& app) {
  nlohmann::json out = nlohmann::json::object();
  for (const CLI::Option* opt : app.get_options()) {
    if (skipped(opt)) continue;
    const std::string& name = opt->get_lnames().front();
    if (opt->get_expected_max() == 0) {
      out[name] = opt->count() > 0 && opt->as<bool>();
      continue;
    }
    const auto& results = opt->results();
    if (results.empty()) {
      out[name] = typed(opt->get_default_str());
    } else if (results.size() == 1) {
      out[name] = typed(results.front());
    } else {
      nlohmann::json arr = nlohmann::json::array();
      for (const auto& r : results) arr.push_back(typed(r));
      out[name] = std::move(arr);
    }
  }
  return out;
}

std::string JsonConfig::to_config(const CLI::App* app, bool, bool, std::string) const {
  return options_to_json(*app).dump(2) + "\n";
}

std::vector<CLI::ConfigItem> JsonConfig::from_config(std::istream& input) const {
  nlohmann::json j;
  try {
    input >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw CLI::ConversionError(std::string("config file is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw CLI::ConversionError("config file must hold a JSON object");
  std::vector<std::string> section;
  if (root_ != nullptr) {
    for (const CLI::App* sub : root_->get_subcommands()) section.push_back(sub->get_name());
  }
  std::vector<CLI::ConfigItem> items;
  for (const auto& [key, value] : j.items()) {
    CLI::ConfigItem item;
    item.parents = section;
    item.name = key;
    std::replace(item.name.begin(), item.name.end(), '_', '-');
    if (value.is_array()) {
      for (const auto& v : value) item.inputs.push_back(scalar_text(v));
    } else {
      item.inputs.push_back(scalar_text(value));
    }
    items.push_back(std::move(item));
  }
  return items;
}

}  // namespace ecd::cli
