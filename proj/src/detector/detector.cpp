// Copyright (C) 2026 The ECD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "ecd/detector/detector.hpp"

#include <algorithm>
#include <cmath>

#include "ecd/core/error.hpp"
#include "ecd/core/numeric.hpp"
#include "ecd/core/random.hpp"
#include "ecd/core/tensor_file.hpp"
#include "ecd/detector/metrics.hpp"

namespace ecd::detector {
namespace {

constexpr const char* kDetectorMagic = "ECD-DETECTOR v1";

double clamp_score(double raw) { return std::clamp(sigmoid(raw), kScoreFloor, 1.0 - kScoreFloor); }

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

NamedTensor f64(std::string name, std::vector<double> values) {
  const auto n = static_cast<std::int64_t>(values.size());
  return {std::move(name), {n}, std::move(values)};
}

NamedTensor i32(std::string name, std::vector<std::int32_t> values) {
  const auto n = static_cast<std::int64_t>(values.size());
  return {std::move(name), {n}, std::move(values)};
}

template <typename T>
const std::vector<T>& get(const TensorFile& file, const std::string& name) {
  const NamedTensor* t = file.find(name);
  if (t == nullptr) throw DataError("detector file has no tensor '" + name + "'");
  const auto* v = std::get_if<std::vector<T>>(&t->data);
  if (v == nullptr) throw DataError("detector tensor '" + name + "' has the wrong element type");
  return *v;
}

nlohmann::json config_json(const DetectorTrainConfig& c) {
  if (c.kind == ClassifierKind::logistic) {
    return {{"max_iter", c.logistic.max_iter}, {"tol", c.logistic.tol}, {"l2", c.logistic.l2},
            {"seed", c.logistic.seed}};
  }
  return {{"n_trees", c.boosted.n_trees},       {"max_depth", c.boosted.max_depth},
          {"learning_rate", c.boosted.learning_rate}, {"lambda", c.boosted.lambda},
          {"min_child_weight", c.boosted.min_child_weight}, {"subsample", c.boosted.subsample},
          {"seed", c.boosted.seed}};
}

double mean_of(const std::vector<SplitMetrics>& s, double SplitMetrics::*field) {
  double sum = 0.0;
  for (const auto& m : s) sum += m.*field;
  return sum / static_cast<double>(s.size());
}

double std_of(const std::vector<SplitMetrics>& s, double SplitMetrics::*field, double mean) {
  if (s.size() < 2) return 0.0;
  double sum = 0.0;
  for (const auto& m : s) sum += (m.*field - mean) * (m.*field - mean);
  return std::sqrt(sum / static_cast<double>(s.size() - 1));
}

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& x, const std::vector<int>& idx) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), x.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = x.row(idx[r]);
  return out;
}

}  // namespace

std::string to_string(ClassifierKind kind) { return kind == ClassifierKind::logistic ? "lr" : "gb"; }

ClassifierKind parse_classifier_kind(const std::string& name) {
  if (name == "lr" || name == "logistic") return ClassifierKind::logistic;
  if (name == "gb" || name == "boosted") return ClassifierKind::boosted;
  throw ConfigError("unknown classifier '" + name + "' (expected lr or gb)");
}

double predict_score(const LogisticModel& model, const Eigen::Ref<const Eigen::VectorXd>& z) {
  return clamp_score(raw_score(model, z));
}

double predict_score(const BoostedTreesModel& model, const Eigen::Ref<const Eigen::VectorXd>& z) {
  return clamp_score(raw_score(model, z));
}

double predict_score(const Classifier& model, const Eigen::Ref<const Eigen::VectorXd>& z) {
  return std::visit([&](const auto& m) { return predict_score(m, z); }, model);
}

int classify(double p_f, double tau) { return p_f >= tau ? 1 : 0; }

ClassifierKind Detector::kind() const {
  return std::holds_alternative<LogisticModel>(model) ? ClassifierKind::logistic : ClassifierKind::boosted;
}

double Detector::score(const Eigen::Ref<const Eigen::VectorXd>& raw_features) const {
  return predict_score(model, features::apply_standardizer(standardizer, raw_features));
}

Eigen::VectorXd Detector::score_rows(const Eigen::MatrixXd& raw_rows) const {
  Eigen::MatrixXd z = raw_rows;
  features::apply_standardizer_rows(standardizer, z);
  Eigen::VectorXd out(z.rows());
  if (const auto* lr = std::get_if<LogisticModel>(&model)) {
    if (z.cols() != lr->weights.size()) throw DataError("feature rows do not match the logistic model dimension");
    const Eigen::VectorXd raw = (z * lr->weights).array() + lr->bias;
    for (Eigen::Index r = 0; r < raw.size(); ++r) out[r] = clamp_score(raw[r]);
    return out;
  }
  for (Eigen::Index r = 0; r < z.rows(); ++r) out[r] = predict_score(model, z.row(r).transpose());
  return out;
}

Detector train_detector(const features::FeatureSchema& schema, const Eigen::MatrixXd& raw_rows,
                        std::span<const int> labels, const DetectorTrainConfig& config) {
  if (raw_rows.cols() != schema.size()) {
    throw DataError("training features have " + std::to_string(raw_rows.cols()) + " columns, schema has " +
                    std::to_string(schema.size()));
  }
  Detector d;
  d.schema = schema;
  d.standardizer = features::fit_standardizer(raw_rows);
  Eigen::MatrixXd z = raw_rows;
  features::apply_standardizer_rows(d.standardizer, z);
  if (config.kind == ClassifierKind::logistic) {
    d.model = train_logistic(z, labels, config.logistic);
  } else {
    d.model = train_boosted(z, labels, config.boosted);
  }
  d.hyperparameters = config_json(config);
  return d;
}

void save_detector(const std::filesystem::path& path, const Detector& d) {
  TensorFile file;
  file.magic = kDetectorMagic;
  file.meta = {{"type", to_string(d.kind())},
               {"schema_hash", d.schema.hash()},
               {"schema", d.schema},
               {"hyperparameters", d.hyperparameters}};
  file.tensors.push_back(f64("standardizer.mean", to_vector(d.standardizer.mean)));
  file.tensors.push_back(f64("standardizer.std", to_vector(d.standardizer.std)));
  std::vector<std::int32_t> degenerate(d.standardizer.degenerate.begin(), d.standardizer.degenerate.end());
  file.tensors.push_back(i32("standardizer.degenerate", std::move(degenerate)));

  if (const auto* lr = std::get_if<LogisticModel>(&d.model)) {
    file.meta["training"] = {{"iterations", lr->iterations}, {"final_loss", lr->final_loss}};
    file.tensors.push_back(f64("weights", to_vector(lr->weights)));
    file.tensors.push_back(f64("bias", {lr->bias}));
  } else {
    const auto& gb = std::get<BoostedTreesModel>(d.model);
    std::vector<std::int32_t> offsets{0}, feature, left, right;
    std::vector<double> threshold, value;
    for (const auto& t : gb.trees) {
      for (const auto& n : t.nodes) {
        feature.push_back(n.feature);
        left.push_back(n.left);
        right.push_back(n.right);
        threshold.push_back(n.threshold);
        value.push_back(n.value);
      }
      offsets.push_back(static_cast<std::int32_t>(feature.size()));
    }
    file.tensors.push_back(f64("init_score", {gb.init_score}));
    file.tensors.push_back(f64("learning_rate", {gb.learning_rate}));
    file.tensors.push_back(i32("tree_offsets", std::move(offsets)));
    file.tensors.push_back(i32("node.feature", std::move(feature)));
    file.tensors.push_back(i32("node.left", std::move(left)));
    file.tensors.push_back(i32("node.right", std::move(right)));
    file.tensors.push_back(f64("node.threshold", std::move(threshold)));
    file.tensors.push_back(f64("node.value", std::move(value)));
  }
  write_tensor_file(path, file);
}

Detector load_detector(const std::filesystem::path& path) {
  const TensorFile file = read_tensor_file(path, kDetectorMagic);
  Detector d;
  try {
    d.schema = file.meta.at("schema").get<features::FeatureSchema>();
    if (file.meta.at("schema_hash").get<std::uint64_t>() != d.schema.hash()) {
      throw DataError(path.string() + ": schema hash mismatch");
    }
    d.hyperparameters = file.meta.value("hyperparameters", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  const auto dim = static_cast<std::size_t>(d.schema.size());
  auto expect_len = [&](const std::string& name, std::size_t got, std::size_t want) {
    if (got != want) {
      throw DataError("detector tensor '" + name + "' has " + std::to_string(got) + " values, expected " +
                      std::to_string(want));
    }
  };
  const auto& mean = get<double>(file, "standardizer.mean");
  const auto& sd = get<double>(file, "standardizer.std");
  const auto& deg = get<std::int32_t>(file, "standardizer.degenerate");
  expect_len("standardizer.mean", mean.size(), dim);
  expect_len("standardizer.std", sd.size(), dim);
  expect_len("standardizer.degenerate", deg.size(), dim);
  d.standardizer.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(dim));
  d.standardizer.std = Eigen::Map<const Eigen::VectorXd>(sd.data(), static_cast<Eigen::Index>(dim));
  d.standardizer.degenerate.assign(deg.begin(), deg.end());

  const std::string type = file.meta.value("type", "");
  if (parse_classifier_kind(type) == ClassifierKind::logistic) {
    LogisticModel lr;
    const auto& w = get<double>(file, "weights");
    expect_len("weights", w.size(), dim);
    lr.weights = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(dim));
    const auto& b = get<double>(file, "bias");
    expect_len("bias", b.size(), 1);
    lr.bias = b[0];
    if (file.meta.contains("training")) {
      lr.iterations = file.meta["training"].value("iterations", 0);
      lr.final_loss = file.meta["training"].value("final_loss", 0.0);
    }
    d.model = std::move(lr);
  } else {
    BoostedTreesModel gb;
    gb.n_features = static_cast<int>(dim);
    gb.init_score = get<double>(file, "init_score").at(0);
    gb.learning_rate = get<double>(file, "learning_rate").at(0);
    const auto& offsets = get<std::int32_t>(file, "tree_offsets");
    const auto& feature = get<std::int32_t>(file, "node.feature");
    const auto& left = get<std::int32_t>(file, "node.left");
    const auto& right = get<std::int32_t>(file, "node.right");
    const auto& threshold = get<double>(file, "node.threshold");
    const auto& value = get<double>(file, "node.value");
    const std::size_t n_nodes = feature.size();
    expect_len("node.left", left.size(), n_nodes);
    expect_len("node.right", right.size(), n_nodes);
    expect_len("node.threshold", threshold.size(), n_nodes);
    expect_len("node.value", value.size(), n_nodes);
    if (offsets.empty() || offsets.front() != 0 || static_cast<std::size_t>(offsets.back()) != n_nodes) {
      throw DataError("detector tree offsets are inconsistent");
    }
    for (std::size_t t = 0; t + 1 < offsets.size(); ++t) {
      RegressionTree tree;
      const int begin = offsets[t], end = offsets[t + 1];
      if (end <= begin) throw DataError("detector contains an empty tree");
      const int size = end - begin;
      for (int k = begin; k < end; ++k) {
        const auto ku = static_cast<std::size_t>(k);
        RegressionTree::Node n{feature[ku], threshold[ku], left[ku], right[ku], value[ku]};
        if (n.feature >= static_cast<int>(dim)) throw DataError("tree split feature outside the schema");
        if (n.feature >= 0 && (n.left <= k - begin || n.right <= k - begin || n.left >= size || n.right >= size)) {
          throw DataError("tree node has invalid children");
        }
        tree.nodes.push_back(n);
      }
      gb.trees.push_back(std::move(tree));
    }
    d.model = std::move(gb);
  }
  return d;
}

DetectorReport crossval_report(const features::FeatureSchema& schema, const Eigen::MatrixXd& raw_rows,
                               std::span<const int> labels, const DetectorTrainConfig& train,
                               const CrossvalConfig& cv) {
  if (cv.k_splits < 2) throw ConfigError("cross-validation needs at least 2 splits");
  if (!(cv.validation_fraction > 0.0 && cv.validation_fraction < 1.0)) {
    throw ConfigError("validation fraction must lie in (0, 1)");
  }
  if (static_cast<std::size_t>(raw_rows.rows()) != labels.size()) {
    throw DataError("feature rows and labels differ in length");
  }
  std::vector<int> pos, neg;
  for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] == 1 ? pos : neg).push_back(static_cast<int>(i));
  if (pos.size() < 2 || neg.size() < 2) {
    throw DataError("cross-validation needs at least two examples of each class");
  }

  DetectorReport report;
  report.tau = cv.tau;
  for (int s = 0; s < cv.k_splits; ++s) {
    Rng rng(derive_seed(cv.seed, static_cast<std::uint64_t>(s)));
    std::vector<int> train_idx, val_idx;
    for (auto cls : {pos, neg}) {
      rng.shuffle(cls.begin(), cls.end());
      auto n_val = static_cast<std::size_t>(std::llround(cv.validation_fraction * static_cast<double>(cls.size())));
      n_val = std::clamp<std::size_t>(n_val, 1, cls.size() - 1);
      val_idx.insert(val_idx.end(), cls.begin(), cls.begin() + static_cast<std::ptrdiff_t>(n_val));
      train_idx.insert(train_idx.end(), cls.begin() + static_cast<std::ptrdiff_t>(n_val), cls.end());
    }
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(val_idx.begin(), val_idx.end());
    std::vector<int> train_labels, val_labels;
    for (int i : train_idx) train_labels.push_back(labels[static_cast<std::size_t>(i)]);
    for (int i : val_idx) val_labels.push_back(labels[static_cast<std::size_t>(i)]);

    const Detector d = train_detector(schema, take_rows(raw_rows, train_idx), train_labels, train);
    const Eigen::VectorXd scores = d.score_rows(take_rows(raw_rows, val_idx));
    const std::span<const double> sc(scores.data(), static_cast<std::size_t>(scores.size()));
    report.splits.push_back({accuracy(sc, val_labels, cv.tau), auroc(sc, val_labels), auprc(sc, val_labels),
                             prevalence(val_labels)});
  }
  for (auto field : {&SplitMetrics::acc, &SplitMetrics::auroc, &SplitMetrics::auprc, &SplitMetrics::prevalence}) {
    report.mean.*field = mean_of(report.splits, field);
    report.stddev.*field = std_of(report.splits, field, report.mean.*field);
  }
  return report;
}

nlohmann::json report_to_json(const DetectorReport& r) {
  auto m = [](const SplitMetrics& s) {
    return nlohmann::json{{"acc", s.acc}, {"auroc", s.auroc}, {"auprc", s.auprc}, {"prevalence", s.prevalence}};
  };
  nlohmann::json splits = nlohmann::json::array();
  for (const auto& s : r.splits) splits.push_back(m(s));
  return {{"tau", r.tau}, {"mean", m(r.mean)}, {"std", m(r.stddev)}, {"splits", splits}};
}

}  // namespace ecd::detector
