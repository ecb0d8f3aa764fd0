// Copyright (C) 2026 The ECD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "ecd/features/standardizer.hpp"

#include <cmath>

#include "ecd/core/error.hpp"
#include "ecd/core/log.hpp"
#include "ecd/core/numeric.hpp"

namespace ecd::features {
namespace {

void check_dimension(const StandardizationStats& stats, Eigen::Index n) {
  if (n != stats.mean.size()) {
    throw DataError("feature dimension " + std::to_string(n) + " does not match standardizer dimension " +
                    std::to_string(stats.mean.size()));
  }
}

}  // namespace

StandardizationStats fit_standardizer(const Eigen::MatrixXd& rows) {
  if (rows.rows() < 2) throw DataError("standardizer needs at least two training vectors");
  StandardizationStats s;
  const double n = static_cast<double>(rows.rows());
  s.mean = rows.colwise().sum().transpose() / n;
  s.std.resize(rows.cols());
  s.degenerate.assign(static_cast<std::size_t>(rows.cols()), false);
  int n_degenerate = 0;
  for (Eigen::Index c = 0; c < rows.cols(); ++c) {
    const double var = (rows.col(c).array() - s.mean[c]).square().sum() / n;
    const double sd = std::sqrt(var);
    if (!(sd >= kStdFloor)) {
      s.std[c] = 1.0;
      s.degenerate[static_cast<std::size_t>(c)] = true;
      ++n_degenerate;
    } else {
      s.std[c] = sd;
    }
  }
  if (n_degenerate > 0) {
    log_warning(std::to_string(n_degenerate) + " constant feature dimension(s) will standardize to 0");
  }
  return s;
}

Eigen::VectorXd apply_standardizer(const StandardizationStats& stats, const Eigen::VectorXd& x) {
  check_dimension(stats, x.size());
  Eigen::VectorXd z = ((x - stats.mean).array() / stats.std.array()).matrix();
  for (Eigen::Index c = 0; c < z.size(); ++c) {
    if (stats.degenerate[static_cast<std::size_t>(c)]) z[c] = 0.0;
  }
  return z;
}

void apply_standardizer_rows(const StandardizationStats& stats, Eigen::MatrixXd& rows) {
  check_dimension(stats, rows.cols());
  for (Eigen::Index c = 0; c < rows.cols(); ++c) {
    if (stats.degenerate[static_cast<std::size_t>(c)]) {
      rows.col(c).setZero();
    } else {
      rows.col(c) = (rows.col(c).array() - stats.mean[c]) / stats.std[c];
    }
  }
}

Eigen::VectorXd unapply_standardizer(const StandardizationStats& stats, const Eigen::VectorXd& z) {
  check_dimension(stats, z.size());
  return (z.array() * stats.std.array() + stats.mean.array()).matrix();
}

void to_json(nlohmann::json& j, const StandardizationStats& s) {
  j = nlohmann::json{{"mean", std::vector<double>(s.mean.data(), s.mean.data() + s.mean.size())},
                     {"std", std::vector<double>(s.std.data(), s.std.data() + s.std.size())},
                     {"degenerate", s.degenerate}};
}

void from_json(const nlohmann::json& j, StandardizationStats& s) {
  const auto mean = j.at("mean").get<std::vector<double>>();
  const auto sd = j.at("std").get<std::vector<double>>();
  s.degenerate = j.at("degenerate").get<std::vector<bool>>();
  if (sd.size() != mean.size() || s.degenerate.size() != mean.size()) {
    throw DataError("standardizer arrays have inconsistent lengths");
  }
  s.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
  s.std = Eigen::Map<const Eigen::VectorXd>(sd.data(), static_cast<Eigen::Index>(sd.size()));
}

}  // namespace ecd::features
