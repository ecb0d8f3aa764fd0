// Copyright (C) 2026 The ECD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string_view>

namespace ecd {

enum class LogLevel { debug = 0, info = 1, warning = 2, error = 3, silent = 4 };

void set_log_level(LogLevel level);
LogLevel log_level();

void log_info(std::string_view message);
void log_warning(std::string_view message);

}  // namespace ecd
