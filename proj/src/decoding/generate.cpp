// Copyright (C) 2026 The ECD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "ecd/decoding/generate.hpp"

#include <cmath>

#include "ecd/core/error.hpp"
#include "ecd/core/numeric.hpp"
#include "ecd/core/random.hpp"
#include "ecd/core/timer.hpp"
#include "ecd/decoding/ops.hpp"
#include "ecd/model/tokenizer.hpp"

namespace ecd::decoding {

using model::ForwardSession;
using model::TraceLevel;

Eigen::VectorXd score_candidates(const model::ForwardTrace& trace, const features::GenerationHistory& history,
                                 const detector::Detector& detector, std::span<const int> candidates,
                                 const features::FeatureOptions& options) {
  const features::StepFeatures step(detector.schema, trace, history, options);
  return detector.score_rows(step.rows(candidates));
}

template <typename Scalar>
GenerationRecord generate(const model::Transformer<Scalar>& model, const detector::Detector* detector,
                          const model::PromptState& prompt, const DecodeConfig& config, const StepObserver& observer) {
  config.validate();
  const bool ecd = config.mode == DecodeMode::ecd;
  const bool dual = config.mode == DecodeMode::dual_pass_baseline;
  if (ecd && detector == nullptr) throw ConfigError("ecd decoding requires a trained detector");
  if (!prompt.generated_ids.empty()) throw ConfigError("prompt must not contain generated tokens");

  GenerationRecord rec;
  rec.config = config;
  rec.visual_prefix_ids = prompt.visual_prefix_ids;
  rec.query_ids = prompt.query_ids;

  const features::FeatureOptions feature_options{config.length_penalty, config.full_kl};
  const TraceLevel level = (ecd || observer) ? TraceLevel::full : TraceLevel::final_only;
  const int max_seq_len = model.config().max_seq_len;
  const std::int64_t start = monotonic_ns();

  ForwardSession<Scalar> main(model, prompt, level);
  std::optional<ForwardSession<Scalar>> distorted;
  if (dual) {
    distorted.emplace(model, model::distort_visual_prefix(prompt, config.noise_seed, config.noise_scale),
                      TraceLevel::final_only);
  }

  Rng rng(config.seed);
  features::GenerationHistory history;
  for (int step = 1; step <= config.max_length; ++step) {
    StepRecord s;
    s.step = step;
    s.forwards = dual ? 2 : 1;
    s.model_ns = main.last_forward_ns() + (dual ? distorted->last_forward_ns() : 0);

    const model::ForwardTrace& trace = main.trace();
    Eigen::VectorXd p = apply_temperature(trace.final_dist, config.temperature);
    const bool suppress_eos = step - 1 < config.min_length;
    if (suppress_eos) p = suppress_token(p, model::kEosId);

    Eigen::VectorXd sample_dist;
    if (ecd) {
      s.candidates = apply_apc(p, config.beta);
      const std::int64_t t0 = monotonic_ns();
      const Eigen::VectorXd pf = score_candidates(trace, history, *detector, s.candidates, feature_options);
      s.classifier_ns = monotonic_ns() - t0;
      s.halluc_scores.assign(pf.data(), pf.data() + pf.size());
      rec.classifier_calls += static_cast<int>(s.candidates.size());
      sample_dist = apply_ecd(p, s.halluc_scores, config.alpha, s.candidates);
    } else if (dual) {
      Eigen::VectorXd pc = apply_temperature(distorted->trace().final_dist, config.temperature);
      if (suppress_eos) pc = suppress_token(pc, model::kEosId);
      s.candidates = apply_apc(p, config.beta);
      sample_dist = contrast_distributions(p, pc, config.gamma, s.candidates);
    } else {
      sample_dist = p;
    }

    const int token = config.strategy == Strategy::greedy ? greedy_pick(sample_dist)
                                                          : sample_nucleus(sample_dist, config.top_p, rng);
    s.token = token;
    s.p_theta = p[token];
    s.p_sample = sample_dist[token];
    if (ecd) {
      for (std::size_t k = 0; k < s.candidates.size(); ++k) {
        if (s.candidates[k] == token) s.chosen_score = s.halluc_scores[k];
      }
    }
    if (config.record_distributions) {
      s.original_dist.assign(p.data(), p.data() + p.size());
      s.final_dist.assign(sample_dist.data(), sample_dist.data() + sample_dist.size());
    }
    if (observer) observer(StepView{step, token, trace, history});
    rec.steps.push_back(std::move(s));
    history.push(token, clamped_log(trace.final_dist[token]));

    if (token == model::kEosId) {
      rec.stop_reason = "eos";
      break;
    }
    rec.tokens.push_back(token);
    if (step == config.max_length) {
      rec.stop_reason = "max_length";
      break;
    }
    if (main.state().length() >= max_seq_len) {
      rec.stop_reason = "context";
      break;
    }
    main.append(token);
    if (dual) distorted->append(token);
  }
  rec.total_ns = monotonic_ns() - start;
  rec.forward_count = main.forward_count() + (dual ? distorted->forward_count() : 0);
  return rec;
}

template <typename Scalar>
Eigen::VectorXd dual_pass_baseline_step(const model::Transformer<Scalar>& model, const model::PromptState& state,
                                        const model::PromptState& distorted, double gamma, double beta) {
  const auto original = model::forward_step(model, state, TraceLevel::final_only);
  const auto contrast = model::forward_step(model, distorted, TraceLevel::final_only);
  const std::vector<int> candidates = apply_apc(original.final_dist, beta);
  return contrast_distributions(original.final_dist, contrast.final_dist, gamma, candidates);
}

nlohmann::json to_json(const GenerationRecord& r, bool include_steps) {
  nlohmann::json j{{"id", r.id},
                   {"config", r.config},
                   {"visual_prefix_ids", r.visual_prefix_ids},
                   {"query_ids", r.query_ids},
                   {"tokens", r.tokens},
                   {"text", r.text},
                   {"stop_reason", r.stop_reason},
                   {"total_ns", r.total_ns},
                   {"forward_count", r.forward_count},
                   {"classifier_calls", r.classifier_calls}};
  if (!r.meta.is_null()) j["meta"] = r.meta;
  if (include_steps) {
    nlohmann::json steps = nlohmann::json::array();
    for (const auto& s : r.steps) {
      nlohmann::json js{{"step", s.step},         {"token", s.token},
                        {"p_theta", s.p_theta},   {"p_sample", s.p_sample},
                        {"forwards", s.forwards}, {"model_ns", s.model_ns},
                        {"classifier_ns", s.classifier_ns}};
      if (!s.candidates.empty()) js["candidates"] = s.candidates;
      if (!s.halluc_scores.empty()) {
        js["halluc_scores"] = s.halluc_scores;
        js["chosen_score"] = s.chosen_score;
      }
      if (!s.original_dist.empty()) {
        js["original_dist"] = s.original_dist;
        js["final_dist"] = s.final_dist;
      }
      steps.push_back(std::move(js));
    }
    j["steps"] = std::move(steps);
  }
  return j;
}

GenerationRecord record_from_json(const nlohmann::json& j) {
  GenerationRecord r;
  try {
    r.id = j.value("id", "");
    r.config = j.at("config").get<DecodeConfig>();
    r.visual_prefix_ids = j.at("visual_prefix_ids").get<std::vector<int>>();
    r.query_ids = j.at("query_ids").get<std::vector<int>>();
    r.tokens = j.at("tokens").get<std::vector<int>>();
    r.text = j.value("text", "");
    r.stop_reason = j.value("stop_reason", "");
    r.total_ns = j.value("total_ns", std::int64_t{0});
    r.forward_count = j.value("forward_count", 0);
    r.classifier_calls = j.value("classifier_calls", 0);
    if (j.contains("meta")) r.meta = j.at("meta");
    if (j.contains("steps")) {
      for (const auto& js : j.at("steps")) {
        StepRecord s;
        s.step = js.at("step").get<int>();
        s.token = js.at("token").get<int>();
        s.p_theta = js.value("p_theta", 0.0);
        s.p_sample = js.value("p_sample", 0.0);
        s.forwards = js.value("forwards", 0);
        s.model_ns = js.value("model_ns", std::int64_t{0});
        s.classifier_ns = js.value("classifier_ns", std::int64_t{0});
        s.candidates = js.value("candidates", std::vector<int>{});
        s.halluc_scores = js.value("halluc_scores", std::vector<double>{});
        s.chosen_score = js.value("chosen_score", -1.0);
        s.original_dist = js.value("original_dist", std::vector<double>{});
        s.final_dist = js.value("final_dist", std::vector<double>{});
        r.steps.push_back(std::move(s));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("generation record: ") + e.what());
  }
  return r;
}

#define ECD_INSTANTIATE(Scalar)                                                                              \
  template GenerationRecord generate<Scalar>(const model::Transformer<Scalar>&, const detector::Detector*,   \
                                             const model::PromptState&, const DecodeConfig&,                  \
                                             const StepObserver&);                                            \
  template Eigen::VectorXd dual_pass_baseline_step<Scalar>(const model::Transformer<Scalar>&,                \
                                                           const model::PromptState&,                         \
                                                           const model::PromptState&, double, double);
ECD_INSTANTIATE(float)
ECD_INSTANTIATE(double)
#undef ECD_INSTANTIATE

}  // namespace ecd::decoding
