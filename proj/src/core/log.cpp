// Copyright (C) 2026 The ECD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "ecd/core/log.hpp"

#include <atomic>
#include <iostream>

namespace ecd {
namespace {
std::atomic<LogLevel> g_level{LogLevel::info};
}

void set_log_level(LogLevel level) { g_level = level; }
LogLevel log_level() { return g_level; }

void log_info(std::string_view message) {
  if (g_level.load() <= LogLevel::info) std::cerr << "[info] " << message << '\n';
}

void log_warning(std::string_view message) {
  if (g_level.load() <= LogLevel::warning) std::cerr << "[warn] " << message << '\n';
}

}  // namespace ecd
