// Copyright (C) 2026 The ECD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "ecd/features/dump.hpp"

#include <cmath>
#include <fstream>
#include <string>

#include <json.hpp>

#include "ecd/core/error.hpp"

namespace ecd::features {

void write_feature_record(std::ostream& out, const FeatureRecord& record) {
  nlohmann::json j{{"step", record.step}, {"token_id", record.token_id}};
  if (record.sequence >= 0) j["sequence"] = record.sequence;
  if (record.label) j["label"] = *record.label;
  j["values"] = record.values;
  out << j.dump() << '\n';
}

void write_feature_dump(const std::filesystem::path& path, const std::vector<FeatureRecord>& records) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& r : records) write_feature_record(out, r);
  if (!out) throw DataError("failed writing " + path.string());
}

std::vector<FeatureRecord> read_feature_dump(const std::filesystem::path& path, bool require_label, int dimension) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  std::vector<FeatureRecord> records;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(where + ": " + e.what());
    }
    FeatureRecord r;
    try {
      r.step = j.at("step").get<int>();
      r.token_id = j.at("token_id").get<int>();
      r.values = j.at("values").get<std::vector<double>>();
      if (j.contains("sequence")) r.sequence = j.at("sequence").get<int>();
      if (j.contains("label") && !j.at("label").is_null()) r.label = j.at("label").get<int>();
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(where + ": " + e.what());
    }
    if (require_label && !r.label) throw DataError(where + ": missing label");
    if (r.label && *r.label != 0 && *r.label != 1) throw DataError(where + ": label must be 0 or 1");
    if (dimension >= 0 && static_cast<int>(r.values.size()) != dimension) {
      throw DataError(where + ": expected " + std::to_string(dimension) + " values, found " +
                      std::to_string(r.values.size()));
    }
    for (double v : r.values) {
      if (!std::isfinite(v)) throw DataError(where + ": non-finite feature value");
    }
    records.push_back(std::move(r));
  }
  return records;
}

void write_schema(const std::filesystem::path& path, const FeatureSchema& schema) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << nlohmann::json(schema).dump(2) << '\n';
}

FeatureSchema read_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  try {
    return nlohmann::json::parse(in).get<FeatureSchema>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

Eigen::MatrixXd feature_matrix(const std::vector<FeatureRecord>& records) {
  if (records.empty()) return {};
  const auto cols = static_cast<Eigen::Index>(records.front().values.size());
  Eigen::MatrixXd m(static_cast<Eigen::Index>(records.size()), cols);
  for (std::size_t r = 0; r < records.size(); ++r) {
    if (static_cast<Eigen::Index>(records[r].values.size()) != cols) throw DataError("ragged feature dump");
    for (Eigen::Index c = 0; c < cols; ++c) m(static_cast<Eigen::Index>(r), c) = records[r].values[c];
  }
  return m;
}

std::vector<int> feature_labels(const std::vector<FeatureRecord>& records) {
  std::vector<int> labels;
  labels.reserve(records.size());
  for (const auto& r : records) {
    if (!r.label) throw DataError("feature record without label");
    labels.push_back(*r.label);
  }
  return labels;
}

}  // namespace ecd::features
