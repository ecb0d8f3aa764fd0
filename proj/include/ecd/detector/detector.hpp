// Copyright (C) 2026 The ECD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "ecd/detector/boosted.hpp"
#include "ecd/detector/logistic.hpp"
#include "ecd/features/schema.hpp"
#include "ecd/features/standardizer.hpp"

namespace ecd::detector {

inline constexpr double kDefaultThreshold = 0.5;

using Classifier = std::variant<LogisticModel, BoostedTreesModel>;

enum class ClassifierKind { logistic, boosted };

std::string to_string(ClassifierKind kind);
ClassifierKind parse_classifier_kind(const std::string& name);

/// sigmoid(raw) clamped to [kScoreFloor, 1 - kScoreFloor]. Inputs are
/// standardized feature vectors.
double predict_score(const LogisticModel& model, const Eigen::Ref<const Eigen::VectorXd>& z);
double predict_score(const BoostedTreesModel& model, const Eigen::Ref<const Eigen::VectorXd>& z);
double predict_score(const Classifier& model, const Eigen::Ref<const Eigen::VectorXd>& z);

/// 1 iff p_f >= tau.
int classify(double p_f, double tau);

/// Schema, training standardization and classifier in one unit: takes raw
/// feature vectors straight from the extractor.
struct Detector {
  features::FeatureSchema schema;
  features::StandardizationStats standardizer;
  Classifier model;
  nlohmann::json hyperparameters = nlohmann::json::object();

  ClassifierKind kind() const;
  double score(const Eigen::Ref<const Eigen::VectorXd>& raw_features) const;
  /// One score per row of raw feature vectors.
  Eigen::VectorXd score_rows(const Eigen::MatrixXd& raw_rows) const;
};

struct DetectorTrainConfig {
  ClassifierKind kind = ClassifierKind::logistic;
  LogisticConfig logistic;
  BoostedConfig boosted;
};

/// Fits the standardizer on `raw_rows`, then the classifier.
Detector train_detector(const features::FeatureSchema& schema, const Eigen::MatrixXd& raw_rows,
                        std::span<const int> labels, const DetectorTrainConfig& config = {});

void save_detector(const std::filesystem::path& path, const Detector& detector);
Detector load_detector(const std::filesystem::path& path);

struct SplitMetrics {
  double acc = 0.0, auroc = 0.0, auprc = 0.0;
  double prevalence = 0.0;  // of the validation part
};

struct DetectorReport {
  std::vector<SplitMetrics> splits;
  SplitMetrics mean, stddev;  // stddev uses the n-1 denominator
  double tau = kDefaultThreshold;
};

struct CrossvalConfig {
  int k_splits = 10;
  double validation_fraction = 0.2;
  double tau = kDefaultThreshold;
  std::uint64_t seed = 0;
};

/// k random stratified train/validation splits; each split fits its own
/// standardizer and classifier.
DetectorReport crossval_report(const features::FeatureSchema& schema, const Eigen::MatrixXd& raw_rows,
                               std::span<const int> labels, const DetectorTrainConfig& train,
                               const CrossvalConfig& cv = {});

nlohmann::json report_to_json(const DetectorReport& report);

}  // namespace ecd::detector
