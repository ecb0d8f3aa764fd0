// Copyright (C) 2026 The ECD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cstdint>

namespace ecd {

inline std::int64_t monotonic_ns() {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

/// Accumulates elapsed nanoseconds across start/stop pairs.
class Stopwatch {
 public:
  void start() { begin_ = monotonic_ns(); }
  std::int64_t stop() {
    const std::int64_t dt = monotonic_ns() - begin_;
    total_ += dt;
    return dt;
  }
  std::int64_t total_ns() const { return total_; }

 private:
  std::int64_t begin_ = 0;
  std::int64_t total_ = 0;
};

}  // namespace ecd
