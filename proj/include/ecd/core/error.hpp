// Copyright (C) 2026 The ECD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace ecd {

/// Root of every error thrown by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A configuration or argument violates a documented invariant.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// I/O failure, malformed file, or content that disagrees with its header.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Malformed serialized artifact (truncated, bad magic, bad header line).
class ParseError : public DataError {
 public:
  using DataError::DataError;
};

/// A quantity is undefined for the given input (e.g. AUROC on one class).
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

/// Internal consistency check failed.
class InvariantError : public Error {
 public:
  using Error::Error;
};

}  // namespace ecd
