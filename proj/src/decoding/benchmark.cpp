// Copyright (C) 2026 The ECD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "ecd/decoding/benchmark.hpp"

#include <algorithm>
#include <cstdio>

#include "ecd/core/error.hpp"

namespace ecd::decoding {
namespace {

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct Accumulator {
  std::vector<double> token_ns, response_ns;
  long steps = 0, forwards = 0, classifier_calls = 0;
  double model_ns = 0, classifier_ns = 0;

  void add(const GenerationRecord& r) {
    const auto n = static_cast<double>(r.steps.size());
    response_ns.push_back(static_cast<double>(r.total_ns));
    token_ns.push_back(static_cast<double>(r.total_ns) / n);
    steps += static_cast<long>(r.steps.size());
    forwards += r.forward_count;
    classifier_calls += r.classifier_calls;
    for (const auto& s : r.steps) {
      model_ns += static_cast<double>(s.model_ns);
      classifier_ns += static_cast<double>(s.classifier_ns);
    }
  }

  ModeTiming finish(DecodeMode mode) const {
    ModeTiming t;
    t.mode = mode;
    t.responses = static_cast<int>(response_ns.size());
    t.steps = steps;
    double total = 0.0;
    for (double v : response_ns) total += v;
    const auto n_steps = static_cast<double>(std::max(steps, 1L));
    t.mean_token_ns = total / n_steps;
    t.median_token_ns = median(token_ns);
    t.mean_response_ns = total / static_cast<double>(std::max<std::size_t>(response_ns.size(), 1));
    t.median_response_ns = median(response_ns);
    t.mean_model_ns = model_ns / n_steps;
    t.mean_classifier_ns = classifier_ns / n_steps;
    t.forwards_per_step = static_cast<double>(forwards) / n_steps;
    t.classifier_calls_per_step = static_cast<double>(classifier_calls) / n_steps;
    return t;
  }
};

}  // namespace

const ModeTiming* LatencyReport::find(DecodeMode mode) const {
  for (const auto& m : modes) {
    if (m.mode == mode) return &m;
  }
  return nullptr;
}

template <typename Scalar>
LatencyReport benchmark_latency(const model::Transformer<Scalar>& model, const detector::Detector* detector,
                                const std::vector<model::PromptState>& prompts, const DecodeConfig& config,
                                const std::vector<DecodeMode>& modes) {
  if (prompts.size() < 10) throw ConfigError("latency benchmark needs at least 10 prompts");
  if (modes.empty()) throw ConfigError("latency benchmark needs at least one mode");
  auto run = [&](const model::PromptState& prompt, DecodeMode mode) {
    DecodeConfig c = config;
    c.mode = mode;
    c.record_distributions = false;
    return generate(model, detector, prompt, c);
  };
  for (DecodeMode mode : modes) run(prompts.front(), mode);

  std::vector<Accumulator> acc(modes.size());
  for (const auto& prompt : prompts) {
    for (std::size_t m = 0; m < modes.size(); ++m) acc[m].add(run(prompt, modes[m]));
  }
  LatencyReport report;
  report.prompts = static_cast<int>(prompts.size());
  report.config = config;
  for (std::size_t m = 0; m < modes.size(); ++m) report.modes.push_back(acc[m].finish(modes[m]));
  return report;
}

std::string format_report(const LatencyReport& r) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "prompts: %d  strategy: %s  max_length: %d\n", r.prompts,
                to_string(r.config.strategy).c_str(), r.config.max_length);
  out += line;
  std::snprintf(line, sizeof line, "%-10s %8s %12s %12s %12s %12s %12s %9s %9s\n", "mode", "steps", "ms/token",
                "med ms/tok", "ms/response", "model ms", "clf ms", "fwd/step", "clf/step");
  out += line;
  for (const auto& m : r.modes) {
    std::snprintf(line, sizeof line, "%-10s %8ld %12.4f %12.4f %12.3f %12.4f %12.4f %9.2f %9.2f\n",
                  to_string(m.mode).c_str(), m.steps, m.mean_token_ns * 1e-6, m.median_token_ns * 1e-6,
                  m.mean_response_ns * 1e-6, m.mean_model_ns * 1e-6, m.mean_classifier_ns * 1e-6,
                  m.forwards_per_step, m.classifier_calls_per_step);
    out += line;
  }
  const ModeTiming* ecd = r.find(DecodeMode::ecd);
  const ModeTiming* dual = r.find(DecodeMode::dual_pass_baseline);
  if (ecd != nullptr && dual != nullptr && dual->mean_token_ns > 0) {
    std::snprintf(line, sizeof line, "ecd / dual_pass per-token time: %.3f\n", ecd->mean_token_ns / dual->mean_token_ns);
    out += line;
  }
  return out;
}

nlohmann::json report_to_json(const LatencyReport& r) {
  nlohmann::json modes = nlohmann::json::array();
  for (const auto& m : r.modes) {
    modes.push_back({{"mode", to_string(m.mode)},
                     {"responses", m.responses},
                     {"steps", m.steps},
                     {"mean_token_ns", m.mean_token_ns},
                     {"median_token_ns", m.median_token_ns},
                     {"mean_response_ns", m.mean_response_ns},
                     {"median_response_ns", m.median_response_ns},
                     {"mean_model_ns", m.mean_model_ns},
                     {"mean_classifier_ns", m.mean_classifier_ns},
                     {"forwards_per_step", m.forwards_per_step},
                     {"classifier_calls_per_step", m.classifier_calls_per_step}});
  }
  return {{"prompts", r.prompts}, {"config", r.config}, {"modes", modes}};
}

template LatencyReport benchmark_latency<float>(const model::Transformer<float>&, const detector::Detector*,
                                                const std::vector<model::PromptState>&, const DecodeConfig&,
                                                const std::vector<DecodeMode>&);
template LatencyReport benchmark_latency<double>(const model::Transformer<double>&, const detector::Detector*,
                                                 const std::vector<model::PromptState>&, const DecodeConfig&,
                                                 const std::vector<DecodeMode>&);

}  // namespace ecd::decoding
