// Copyright (C) 2026 The ECD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <CLI11.hpp>
#include <json.hpp>

namespace ecd::cli {

/// CLI11 config reader/writer for flat JSON objects. Keys are long option
/// names; underscores and dashes are interchangeable. CLI11 only reads the
/// config file of the root app, so keys are routed to whichever subcommand
/// of `root` was selected on the command line.
class JsonConfig : public CLI::Config {
 public:
  explicit JsonConfig(const CLI::App* root = nullptr) : root_(root) {}
  std::string to_config(const CLI::App* app, bool default_also, bool write_description,
                        std::string prefix) const override;
  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override;

 private:
  const CLI::App* root_;
};

/// Every option of `app` (defaults included) as a typed JSON object.
nlohmann::json options_to_json(const CLI::App& app);

}  // namespace ecd::cli
