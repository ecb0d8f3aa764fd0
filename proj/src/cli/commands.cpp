// Copyright (C) 2026 The ECD Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ecd/cli/cli.hpp"
#include "ecd/core/error.hpp"
#include "ecd/core/log.hpp"
#include "ecd/core/random.hpp"
#include "ecd/decoding/benchmark.hpp"
#include "ecd/decoding/config.hpp"
#include "ecd/decoding/generate.hpp"
#include "ecd/detector/detector.hpp"
#include "ecd/eval/chair.hpp"
#include "ecd/eval/corpus.hpp"
#include "ecd/eval/pope.hpp"
#include "ecd/features/dump.hpp"
#include "ecd/features/features.hpp"
#include "ecd/model/checkpoint.hpp"
#include "ecd/model/trainer.hpp"
#include "ecd/model/transformer.hpp"
#include "json_config.hpp"

namespace ecd::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kRecordsFile = "records.jsonl";
constexpr const char* kSynonymsFile = "synonyms.txt";
constexpr const char* kVocabFile = "vocab.txt";
constexpr const char* kCorpusMetaFile = "corpus.json";
constexpr const char* kModelFile = "model.ckpt";

// ---------------------------------------------------------------------------
// File helpers

void ensure_parent(const fs::path& path) {
  if (!path.has_parent_path()) return;
  std::error_code ec;
  fs::create_directories(path.parent_path(), ec);
  if (ec) throw DataError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
}

void write_json(const fs::path& path, const json& j) {
  ensure_parent(path);
  std::ofstream out(path);
  out << j.dump(2) << '\n';
  if (!out) throw DataError("cannot write " + path.string());
}

void require_file(const fs::path& path, const std::string& what) {
  if (!fs::is_regular_file(path)) throw DataError(what + " not found: " + path.string());
}

fs::path sidecar(const fs::path& path, const std::string& suffix) {
  return fs::path(path.string() + suffix);
}

struct CorpusFiles {
  std::vector<eval::AnnotatedRecord> records;
  eval::SynonymMap synonyms;
  model::Vocabulary vocab;
};

CorpusFiles load_corpus(const fs::path& dir) {
  require_file(dir / kRecordsFile, "corpus records");
  require_file(dir / kSynonymsFile, "synonym map");
  require_file(dir / kVocabFile, "vocabulary");
  return {eval::read_records(dir / kRecordsFile), eval::SynonymMap::load(dir / kSynonymsFile),
          model::Vocabulary::load(dir / kVocabFile)};
}

std::vector<eval::AnnotatedRecord> split_or_throw(const CorpusFiles& corpus, const std::string& split) {
  auto out = eval::select_split(corpus.records, split);
  if (out.empty()) throw DataError("corpus has no records in split '" + split + "'");
  return out;
}

model::Checkpoint load_model(const fs::path& path, const CorpusFiles& corpus) {
  require_file(path, "model checkpoint");
  auto ckpt = model::load_checkpoint(path);
  if (ckpt.config.vocab_size != corpus.vocab.size()) {
    throw DataError("checkpoint vocabulary size " + std::to_string(ckpt.config.vocab_size) +
                    " does not match the corpus vocabulary (" + std::to_string(corpus.vocab.size()) + ")");
  }
  return ckpt;
}

json run_header(const CLI::App& sub) { return {{"command", sub.get_name()}, {"options", options_to_json(sub)}}; }

std::string fixed(double v, int digits = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

// ---------------------------------------------------------------------------
// Shared option groups

struct ModelOptions {
  int d_model = 128;
  int n_layers = 4;
  int n_heads = 4;
  int d_ff = 512;
  model::TrainConfig train;
  eval::TrainingDataConfig data;
  std::uint64_t seed = 0;
};

void add_model_options(CLI::App* app, ModelOptions& o, const std::string& seed_flag) {
  app->add_option("--d-model", o.d_model, "Hidden width")->check(CLI::PositiveNumber);
  app->add_option("--n-layers", o.n_layers, "Transformer layers")->check(CLI::PositiveNumber);
  app->add_option("--n-heads", o.n_heads, "Attention heads per layer")->check(CLI::PositiveNumber);
  app->add_option("--d-ff", o.d_ff, "MLP width")->check(CLI::PositiveNumber);
  app->add_option("--steps", o.train.steps, "Optimizer steps")->check(CLI::PositiveNumber);
  app->add_option("--batch-size", o.train.batch_size, "Examples per step")->check(CLI::PositiveNumber);
  app->add_option("--learning-rate", o.train.learning_rate, "Peak Adam learning rate")->check(CLI::PositiveNumber);
  app->add_option("--captions-per-record", o.data.captions_per_record, "Training captions per record")
      ->check(CLI::NonNegativeNumber);
  app->add_option("--questions-per-record", o.data.questions_per_record, "Training yes/no questions per record")
      ->check(CLI::NonNegativeNumber);
  app->add_option("--hallucination-rate", o.data.hallucination_rate,
                  "Share of training captions that mention one absent object")
      ->check(CLI::Range(0.0, 1.0));
  app->add_option(seed_flag, o.seed, "Seed for initialization, data order and sampling");
}

struct DecodeOptions {
  decoding::DecodeConfig config;
  std::string mode = "regular";
  std::string strategy = "nucleus";

  decoding::DecodeConfig resolve() const {
    decoding::DecodeConfig c = config;
    c.mode = decoding::parse_mode(mode);
    c.strategy = decoding::parse_strategy(strategy);
    c.validate();
    return c;
  }
};

void add_decode_options(CLI::App* app, DecodeOptions& o, bool with_mode) {
  auto& c = o.config;
  if (with_mode) {
    app->add_option("--mode", o.mode, "regular, ecd or dual_pass")
        ->check(CLI::IsMember({"regular", "ecd", "dual_pass"}));
  }
  app->add_option("--strategy", o.strategy, "greedy or nucleus")->check(CLI::IsMember({"greedy", "nucleus"}));
  app->add_option("--alpha", c.alpha, "Weight of the hallucination-score correction");
  app->add_option("--beta", c.beta, "Plausibility cut relative to the top probability");
  app->add_option("--gamma", c.gamma, "Contrast weight of the dual-pass baseline");
  app->add_option("--top-p", c.top_p, "Nucleus mass");
  app->add_option("--temperature", c.temperature, "Softmax temperature");
  app->add_option("--max-length", c.max_length, "Maximum generated tokens, EOS included");
  app->add_option("--min-length", c.min_length, "EOS is blocked before this many tokens");
  app->add_option("--seed", c.seed, "Sampling seed; prompt i uses a stream derived from it");
  app->add_option("--tau", c.tau, "Threshold for flagging a token as hallucinated");
  app->add_option("--length-penalty", c.length_penalty, "Exponent of the sequence-score normalization");
  app->add_flag("--full-kl", c.full_kl, "Use the full-vocabulary divergence feature");
  app->add_option("--noise-seed", c.noise_seed, "Visual-noise stream of the dual-pass baseline");
  app->add_option("--noise-scale", c.noise_scale, "Visual-noise magnitude of the dual-pass baseline");
  app->add_flag("--record-distributions", c.record_distributions, "Store per-step distributions");
}

// ---------------------------------------------------------------------------
// make-corpus / train-model

void train_model_into(const CorpusFiles& corpus, const ModelOptions& o, const fs::path& out, const json& header) {
  model::ModelConfig mc;
  mc.vocab_size = corpus.vocab.size();
  mc.d_model = o.d_model;
  mc.n_layers = o.n_layers;
  mc.n_heads = o.n_heads;
  mc.d_ff = o.d_ff;
  mc.n_visual_slots = std::max(mc.n_visual_slots, eval::required_visual_slots());
  mc.seed = derive_seed(o.seed, 0);
  mc.validate();

  const auto train = split_or_throw(corpus, "train");
  eval::TrainingDataConfig data = o.data;
  data.seed = derive_seed(o.seed, 1);
  model::TrainConfig tc = o.train;
  tc.seed = derive_seed(o.seed, 2);
  const auto examples = eval::make_training_examples(train, corpus.vocab, data, mc.n_visual_tokens);
  if (examples.empty()) throw DataError("no training examples; raise --captions-per-record or --questions-per-record");

  log_info("fitting model on " + std::to_string(examples.size()) + " examples for " + std::to_string(tc.steps) +
           " steps");
  double last_loss = 0.0;
  const int every = std::max(1, tc.steps / 10);
  const auto ckpt = model::fit(model::init_model(mc), examples, tc, [&](int step, double loss) {
    last_loss = loss;
    if (step % every == 0) log_info("step " + std::to_string(step) + " loss " + fixed(loss));
  });
  ensure_parent(out);
  model::save_checkpoint(ckpt, out);
  write_json(sidecar(out, ".json"), {{"run_config", header},
                                     {"model_config", mc},
                                     {"training_examples", examples.size()},
                                     {"final_batch_loss", last_loss}});
  std::cout << "model: " << out.string() << " (" << examples.size() << " examples, final batch loss "
            << fixed(last_loss) << ")\n";
}

struct MakeCorpusArgs {
  fs::path out;
  eval::CorpusConfig corpus;
  bool with_model = false;
  ModelOptions model;
};

void cmd_make_corpus(const CLI::App& sub, const MakeCorpusArgs& a) {
  const json header = run_header(sub);
  const auto corpus = eval::make_corpus(a.corpus);
  std::error_code ec;
  fs::create_directories(a.out, ec);
  if (ec) throw DataError("cannot create " + a.out.string() + ": " + ec.message());
  eval::write_records(a.out / kRecordsFile, corpus.records);
  corpus.synonyms.save(a.out / kSynonymsFile);
  corpus.vocab.save(a.out / kVocabFile);
  const auto n_eval = eval::select_split(corpus.records, "eval").size();
  write_json(a.out / kCorpusMetaFile, {{"run_config", header},
                                       {"records", corpus.records.size()},
                                       {"train_records", corpus.records.size() - n_eval},
                                       {"eval_records", n_eval},
                                       {"objects", corpus.synonyms.canonical_names().size()},
                                       {"vocab_size", corpus.vocab.size()}});
  std::cout << "corpus: " << corpus.records.size() << " records (" << corpus.records.size() - n_eval << " train, "
            << n_eval << " eval), vocabulary " << corpus.vocab.size() << " -> " << a.out.string() << "\n";
  if (a.with_model) {
    train_model_into({corpus.records, corpus.synonyms, corpus.vocab}, a.model, a.out / kModelFile, header);
  }
}

struct TrainModelArgs {
  fs::path corpus;
  fs::path out;
  ModelOptions model;
};

void cmd_train_model(const CLI::App& sub, const TrainModelArgs& a) {
  const auto corpus = load_corpus(a.corpus);
  train_model_into(corpus, a.model, a.out.empty() ? a.corpus / kModelFile : a.out, run_header(sub));
}

// ---------------------------------------------------------------------------
// train-detector

struct TrainDetectorArgs {
  fs::path corpus;
  fs::path model;
  fs::path out;
  fs::path features_out;
  std::string classifier = "lr";
  int samples_per_record = 1;
  int limit = 0;
  int splits = 10;
  double validation_fraction = 0.2;
  std::uint64_t seed = 0;
  detector::DetectorTrainConfig train;
  DecodeOptions decode;
};

void cmd_train_detector(const CLI::App& sub, TrainDetectorArgs a) {
  const json header = run_header(sub);
  const auto corpus = load_corpus(a.corpus);
  const auto ckpt = load_model(a.model, corpus);
  const model::Model model(ckpt);
  const auto schema = features::FeatureSchema::canonical(ckpt.config.n_layers, ckpt.config.n_heads);
  auto records = split_or_throw(corpus, "train");
  if (a.limit > 0 && static_cast<std::size_t>(a.limit) < records.size()) records.resize(a.limit);

  decoding::DecodeConfig dc = a.decode.resolve();
  dc.mode = decoding::DecodeMode::regular;
  const features::FeatureOptions fo{dc.length_penalty, dc.full_kl};

  std::vector<features::FeatureRecord> rows;
  int captions = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    const auto prompt = eval::make_prompt(r, eval::caption_query(), corpus.vocab, ckpt.config.n_visual_tokens);
    const std::set<std::string> truth(r.objects.begin(), r.objects.end());
    for (int s = 0; s < a.samples_per_record; ++s) {
      dc.seed = derive_seed(a.seed, i * static_cast<std::size_t>(a.samples_per_record) + s);
      std::vector<std::vector<double>> step_rows;
      const auto observer = [&](const decoding::StepView& v) {
        features::StepFeatures f(schema, v.trace, v.history, fo);
        std::vector<double> row(schema.size());
        f.fill(v.token, row);
        step_rows.resize(v.step);
        step_rows[v.step - 1] = std::move(row);
      };
      const auto rec = decoding::generate(model, nullptr, prompt, dc, observer);
      std::vector<std::string> words;
      for (int id : rec.tokens) words.push_back(corpus.vocab.token(id));
      for (const auto& l : eval::label_tokens(words, truth, corpus.synonyms)) {
        features::FeatureRecord fr;
        fr.step = l.index + 1;
        fr.token_id = rec.tokens[l.index];
        fr.label = l.label;
        fr.values = step_rows.at(l.index);
        fr.sequence = captions;
        rows.push_back(std::move(fr));
      }
      ++captions;
    }
  }
  if (rows.empty()) throw DataError("generated captions mention no objects; there is nothing to label");
  if (!a.features_out.empty()) {
    ensure_parent(a.features_out);
    features::write_feature_dump(a.features_out, rows);
    features::write_schema(sidecar(a.features_out, ".schema.json"), schema);
  }

  const Eigen::MatrixXd x = features::feature_matrix(rows);
  const std::vector<int> y = features::feature_labels(rows);
  const long positives = std::count(y.begin(), y.end(), 1);
  log_info("labeled " + std::to_string(rows.size()) + " object tokens from " + std::to_string(captions) +
           " captions, " + std::to_string(positives) + " hallucinated");

  a.train.kind = detector::parse_classifier_kind(a.classifier);
  detector::CrossvalConfig cv;
  cv.k_splits = a.splits;
  cv.validation_fraction = a.validation_fraction;
  cv.tau = dc.tau;
  cv.seed = derive_seed(a.seed, 1u << 20);
  const auto report = detector::crossval_report(schema, x, y, a.train, cv);
  const auto det = detector::train_detector(schema, x, y, a.train);
  ensure_parent(a.out);
  detector::save_detector(a.out, det);
  write_json(sidecar(a.out, ".report.json"), {{"run_config", header},
                                              {"classifier", a.classifier},
                                              {"captions", captions},
                                              {"tokens", rows.size()},
                                              {"hallucinated", positives},
                                              {"crossval", detector::report_to_json(report)}});
  std::cout << "detector: " << a.out.string() << " (" << a.classifier << ", " << rows.size() << " tokens, prevalence "
            << fixed(static_cast<double>(positives) / rows.size()) << ")\n"
            << "  " << a.splits << " splits  acc " << fixed(report.mean.acc) << " +/- " << fixed(report.stddev.acc)
            << "  auroc " << fixed(report.mean.auroc) << " +/- " << fixed(report.stddev.auroc) << "  auprc "
            << fixed(report.mean.auprc) << " +/- " << fixed(report.stddev.auprc) << "\n";
}

// ---------------------------------------------------------------------------
// generate

struct GenerateArgs {
  fs::path model;
  fs::path detector;
  fs::path corpus;
  fs::path out;
  std::string split = "eval";
  std::string task = "caption";
  std::string pope_strategy = "random";
  int pope_k = 3;
  int limit = 0;
  bool no_steps = false;
  DecodeOptions decode;
};

struct Prompt {
  std::string id;
  model::PromptState state;
  json meta;
};

std::vector<Prompt> build_prompts(const CorpusFiles& corpus, std::vector<eval::AnnotatedRecord> records,
                                  const std::string& task, const std::string& pope_strategy, int pope_k,
                                  std::uint64_t seed, int n_visual_tokens) {
  std::vector<Prompt> out;
  if (task == "caption") {
    for (const auto& r : records) {
      out.push_back({r.record_id, eval::make_prompt(r, eval::caption_query(), corpus.vocab, n_visual_tokens),
                     {{"task", "caption"}, {"record_id", r.record_id}}});
    }
    return out;
  }
  // MME existence questions are one positive and one negative per image.
  const int k = task == "mme" ? 1 : pope_k;
  const auto strategy = eval::parse_pope_strategy(pope_strategy);
  const auto questions = eval::build_pope_questions(records, corpus.synonyms.canonical_names(), strategy, k, seed);
  std::map<std::string, const eval::AnnotatedRecord*> by_id;
  for (const auto& r : records) by_id[r.record_id] = &r;
  for (const auto& q : questions) {
    const auto& r = *by_id.at(q.record_id);
    json meta = eval::to_json(q);
    meta["task"] = task;
    out.push_back({q.record_id + ":" + q.object,
                   eval::make_prompt(r, eval::pope_query(q.object), corpus.vocab, n_visual_tokens), std::move(meta)});
  }
  return out;
}

void cmd_generate(const CLI::App& sub, const GenerateArgs& a) {
  const json header = run_header(sub);
  const auto corpus = load_corpus(a.corpus);
  const auto ckpt = load_model(a.model, corpus);
  const model::Model model(ckpt);
  const decoding::DecodeConfig config = a.decode.resolve();
  std::optional<detector::Detector> det;
  if (!a.detector.empty()) {
    require_file(a.detector, "detector");
    det = detector::load_detector(a.detector);
  }
  if (config.mode == decoding::DecodeMode::ecd && !det) throw ConfigError("--mode ecd needs --detector");

  auto records = split_or_throw(corpus, a.split);
  if (a.limit > 0 && static_cast<std::size_t>(a.limit) < records.size()) records.resize(a.limit);
  const auto prompts =
      build_prompts(corpus, records, a.task, a.pope_strategy, a.pope_k, config.seed, ckpt.config.n_visual_tokens);

  ensure_parent(a.out);
  std::ofstream out(a.out);
  if (!out) throw DataError("cannot write " + a.out.string());
  out << json{{"run_config", header}}.dump() << '\n';
  long tokens = 0, forwards = 0;
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    decoding::DecodeConfig c = config;
    c.seed = derive_seed(config.seed, i);
    auto rec = decoding::generate(model, det ? &*det : nullptr, prompts[i].state, c);
    rec.id = prompts[i].id;
    rec.text = corpus.vocab.decode(rec.tokens);
    rec.meta = prompts[i].meta;
    tokens += static_cast<long>(rec.steps.size());
    forwards += rec.forward_count;
    out << decoding::to_json(rec, !a.no_steps).dump() << '\n';
  }
  if (!out) throw DataError("failed writing " + a.out.string());
  std::cout << "generated " << prompts.size() << " " << a.task << " responses (" << decoding::to_string(config.mode)
            << ", " << tokens << " steps, " << forwards << " forwards) -> " << a.out.string() << "\n";
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateArgs {
  fs::path records;
  fs::path corpus;
  fs::path out;
  std::string benchmark;
};

void cmd_evaluate(const CLI::App& sub, const EvaluateArgs& a) {
  const json header = run_header(sub);
  const auto corpus = load_corpus(a.corpus);
  require_file(a.records, "generation records");
  std::map<std::string, const eval::AnnotatedRecord*> by_id;
  for (const auto& r : corpus.records) by_id[r.record_id] = &r;

  const std::string task = a.benchmark == "chair" ? "caption" : a.benchmark;
  std::vector<decoding::GenerationRecord> gens;
  json source;
  {
    std::ifstream in(a.records);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      json j;
      try {
        j = json::parse(line);
      } catch (const json::parse_error& e) {
        throw ParseError(a.records.string() + ":" + std::to_string(line_no) + ": " + e.what());
      }
      if (j.contains("run_config")) {
        source = j.at("run_config");
        continue;
      }
      auto rec = decoding::record_from_json(j);
      const std::string got = rec.meta.is_object() ? rec.meta.value("task", "") : "";
      if (got != task) {
        throw DataError("record '" + rec.id + "' was generated for task '" + got + "', but benchmark '" +
                        a.benchmark + "' needs '" + task + "'");
      }
      if (!by_id.contains(rec.meta.value("record_id", ""))) {
        throw DataError("record '" + rec.id + "' refers to an image that is not in the corpus");
      }
      gens.push_back(std::move(rec));
    }
  }
  if (gens.empty()) throw DataError("no generation records in " + a.records.string());

  json report;
  std::ostringstream table;
  if (a.benchmark == "chair") {
    std::vector<eval::CaptionInput> captions;
    for (const auto& g : gens) {
      const auto& r = *by_id.at(g.meta.at("record_id").get<std::string>());
      captions.push_back({model::split_words(g.text), {r.objects.begin(), r.objects.end()}});
    }
    const auto c = eval::chair_metrics(captions, corpus.synonyms);
    report = eval::to_json(c);
    table << "CHAIR_i   " << fixed(100 * c.chair_i, 2) << "\nCHAIR_s   " << fixed(100 * c.chair_s, 2)
          << "\nCoverage  " << fixed(100 * c.coverage, 2) << "\ncaptions  " << c.captions << "\nmean len  "
          << fixed(c.mean_length, 2) << "\n";
  } else if (a.benchmark == "pope") {
    std::vector<eval::PopeQuestion> questions;
    std::unique_ptr<bool[]> yes(new bool[gens.size()]);
    for (std::size_t i = 0; i < gens.size(); ++i) {
      questions.push_back(eval::question_from_json(gens[i].meta));
      yes[i] = eval::parse_yes(model::split_words(gens[i].text));
    }
    const auto p = eval::pope_evaluate(questions, std::span<const bool>(yes.get(), gens.size()));
    report = eval::to_json(p);
    table << "Accuracy   " << fixed(100 * p.accuracy, 2) << "\nPrecision  " << fixed(100 * p.precision, 2)
          << "\nRecall     " << fixed(100 * p.recall, 2) << "\nF1         " << fixed(100 * p.f1, 2)
          << "\nYes ratio  " << fixed(100 * p.yes_ratio, 2) << "\nquestions  " << p.questions << "\n";
  } else {
    std::vector<eval::MmeAnswer> answers;
    for (const auto& g : gens) {
      answers.push_back({g.meta.at("record_id").get<std::string>(), g.meta.at("positive").get<bool>(),
                         eval::parse_yes(model::split_words(g.text))});
    }
    const auto m = eval::mme_score(answers);
    report = eval::to_json(m);
    table << "accuracy   " << fixed(m.accuracy, 2) << "\naccuracy+  " << fixed(m.accuracy_plus, 2) << "\nscore      "
          << fixed(m.combined, 2) << "\nimages     " << m.images << "\n";
  }
  std::cout << a.benchmark << " (" << gens.size() << " responses)\n" << table.str();
  if (!a.out.empty()) {
    write_json(a.out, {{"run_config", header},
                       {"generation_run_config", source},
                       {"benchmark", a.benchmark},
                       {"responses", gens.size()},
                       {"report", report}});
  }
}

// ---------------------------------------------------------------------------
// benchmark

struct BenchmarkArgs {
  fs::path model;
  fs::path detector;
  fs::path corpus;
  fs::path out;
  std::string split = "eval";
  int n_prompts = 20;
  std::vector<std::string> modes{"regular", "ecd", "dual_pass"};
  DecodeOptions decode;
};

void cmd_benchmark(const CLI::App& sub, const BenchmarkArgs& a) {
  const json header = run_header(sub);
  const auto corpus = load_corpus(a.corpus);
  const auto ckpt = load_model(a.model, corpus);
  const model::Model model(ckpt);
  require_file(a.detector, "detector");
  const auto det = detector::load_detector(a.detector);
  const decoding::DecodeConfig config = a.decode.resolve();

  auto records = split_or_throw(corpus, a.split);
  if (static_cast<std::size_t>(a.n_prompts) < records.size()) records.resize(a.n_prompts);
  std::vector<model::PromptState> prompts;
  for (const auto& r : records) {
    prompts.push_back(eval::make_prompt(r, eval::caption_query(), corpus.vocab, ckpt.config.n_visual_tokens));
  }
  std::vector<decoding::DecodeMode> modes;
  for (const auto& m : a.modes) modes.push_back(decoding::parse_mode(m));
  const auto report = decoding::benchmark_latency(model, &det, prompts, config, modes);
  std::cout << decoding::format_report(report);
  if (!a.out.empty()) write_json(a.out, {{"run_config", header}, {"report", decoding::report_to_json(report)}});
}

// ---------------------------------------------------------------------------

CLI::App* add_command(CLI::App& app, const std::string& name, const std::string& description) {
  return app.add_subcommand(name, description);
}

int run_parsed(std::vector<std::string> args) {
  CLI::App app{"Hallucination-aware decoding toolkit for a toy vision-language model", "ecd"};
  app.config_formatter(std::make_shared<JsonConfig>(&app));
  app.set_config("--config", "", "JSON object of option values for the subcommand; flags take precedence");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.fallthrough();
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "debug, info, warning, error or silent")
      ->check(CLI::IsMember({"debug", "info", "warning", "error", "silent"}));

  std::function<void()> action;

  MakeCorpusArgs mc;
  auto* make = add_command(app, "make-corpus", "Synthesize annotated records, synonyms and vocabulary");
  make->add_option("--out", mc.out, "Output directory")->required();
  make->add_option("--seed", mc.corpus.seed, "Corpus seed");
  make->add_option("--n-records", mc.corpus.n_records, "Number of records")->check(CLI::Range(2, 1000000));
  make->add_option("--eval-fraction", mc.corpus.eval_fraction, "Share of records held out for evaluation")
      ->check(CLI::Range(0.0, 1.0));
  make->add_option("--min-objects", mc.corpus.min_objects, "Fewest objects per record")->check(CLI::PositiveNumber);
  make->add_option("--max-objects", mc.corpus.max_objects, "Most objects per record")->check(CLI::PositiveNumber);
  make->add_option("--off-scene-rate", mc.corpus.off_scene_rate, "Chance an object comes from another scene")
      ->check(CLI::Range(0.0, 1.0));
  make->add_flag("--with-model", mc.with_model, "Also fit the toy model and write model.ckpt");
  add_model_options(make, mc.model, "--model-seed");
  make->callback([&] { action = [&] { cmd_make_corpus(*make, mc); }; });

  TrainModelArgs tm;
  auto* train_model = add_command(app, "train-model", "Fit the toy model on the training split");
  train_model->add_option("--corpus", tm.corpus, "Corpus directory")->required();
  train_model->add_option("--out", tm.out, "Checkpoint path (default: <corpus>/model.ckpt)");
  add_model_options(train_model, tm.model, "--seed");
  train_model->callback([&] { action = [&] { cmd_train_model(*train_model, tm); }; });

  TrainDetectorArgs td;
  auto* train_det = add_command(app, "train-detector", "Label generated captions and fit the hallucination detector");
  train_det->add_option("--corpus", td.corpus, "Corpus directory")->required();
  train_det->add_option("--model", td.model, "Model checkpoint")->required();
  train_det->add_option("--out", td.out, "Detector output path")->required();
  train_det->add_option("--features-out", td.features_out, "Also write the labeled feature rows (JSONL)");
  train_det->add_option("--classifier", td.classifier, "lr or gb")->check(CLI::IsMember({"lr", "gb"}));
  train_det->add_option("--samples-per-record", td.samples_per_record, "Captions sampled per training record")
      ->check(CLI::PositiveNumber);
  train_det->add_option("--limit", td.limit, "Use at most this many training records (0 = all)")
      ->check(CLI::NonNegativeNumber);
  train_det->add_option("--splits", td.splits, "Random validation splits in the report")->check(CLI::PositiveNumber);
  train_det->add_option("--validation-fraction", td.validation_fraction, "Validation share of each split")
      ->check(CLI::Range(0.0, 1.0));
  train_det->add_option("--l2", td.train.logistic.l2, "Logistic L2 penalty")->check(CLI::NonNegativeNumber);
  train_det->add_option("--max-iter", td.train.logistic.max_iter, "Logistic iterations")->check(CLI::PositiveNumber);
  train_det->add_option("--n-trees", td.train.boosted.n_trees, "Boosting rounds")->check(CLI::PositiveNumber);
  train_det->add_option("--max-depth", td.train.boosted.max_depth, "Tree depth")->check(CLI::PositiveNumber);
  train_det->add_option("--gb-learning-rate", td.train.boosted.learning_rate, "Boosting shrinkage")
      ->check(CLI::PositiveNumber);
  train_det->add_option("--detector-seed", td.seed, "Seed for caption sampling and validation splits");
  add_decode_options(train_det, td.decode, false);
  train_det->callback([&] { action = [&] { cmd_train_detector(*train_det, td); }; });

  GenerateArgs ga;
  auto* gen = add_command(app, "generate", "Decode responses for corpus prompts");
  gen->add_option("--model", ga.model, "Model checkpoint")->required();
  gen->add_option("--detector", ga.detector, "Detector (required for --mode ecd)");
  gen->add_option("--corpus", ga.corpus, "Corpus directory")->required();
  gen->add_option("--out", ga.out, "Output JSONL path")->required();
  gen->add_option("--split", ga.split, "Record split")->check(CLI::IsMember({"train", "eval"}));
  gen->add_option("--task", ga.task, "caption, pope or mme")->check(CLI::IsMember({"caption", "pope", "mme"}));
  gen->add_option("--pope-strategy", ga.pope_strategy, "random, popular or adversarial")
      ->check(CLI::IsMember({"random", "popular", "adversarial"}));
  gen->add_option("--pope-k", ga.pope_k, "Positive and negative questions per image")->check(CLI::PositiveNumber);
  gen->add_option("--limit", ga.limit, "Use at most this many records (0 = all)")->check(CLI::NonNegativeNumber);
  gen->add_flag("--no-steps", ga.no_steps, "Omit per-step telemetry");
  add_decode_options(gen, ga.decode, true);
  gen->callback([&] { action = [&] { cmd_generate(*gen, ga); }; });

  EvaluateArgs ea;
  auto* ev = add_command(app, "evaluate", "Score generation records against the corpus");
  ev->add_option("--records", ea.records, "Generation records (JSONL)")->required();
  ev->add_option("--corpus", ea.corpus, "Corpus directory")->required();
  ev->add_option("--benchmark", ea.benchmark, "chair, pope or mme")
      ->required()
      ->check(CLI::IsMember({"chair", "pope", "mme"}));
  ev->add_option("--out", ea.out, "Report JSON path");
  ev->callback([&] { action = [&] { cmd_evaluate(*ev, ea); }; });

  BenchmarkArgs ba;
  auto* bench = add_command(app, "benchmark", "Compare per-token latency of decoding modes");
  bench->add_option("--model", ba.model, "Model checkpoint")->required();
  bench->add_option("--detector", ba.detector, "Detector")->required();
  bench->add_option("--corpus", ba.corpus, "Corpus directory")->required();
  bench->add_option("--out", ba.out, "Report JSON path");
  bench->add_option("--split", ba.split, "Record split")->check(CLI::IsMember({"train", "eval"}));
  bench->add_option("--n-prompts", ba.n_prompts, "Caption prompts to time (at least 10)")->check(CLI::Range(10, 100000));
  bench->add_option("--modes", ba.modes, "Modes to compare")->check(CLI::IsMember({"regular", "ecd", "dual_pass"}));
  add_decode_options(bench, ba.decode, false);
  bench->callback([&] { action = [&] { cmd_benchmark(*bench, ba); }; });

  try {
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  static const std::map<std::string, LogLevel> levels{{"debug", LogLevel::debug},
                                                      {"info", LogLevel::info},
                                                      {"warning", LogLevel::warning},
                                                      {"error", LogLevel::error},
                                                      {"silent", LogLevel::silent}};
  const LogLevel previous = ecd::log_level();
  set_log_level(levels.at(log_level));
  struct Restore {
    LogLevel level;
    ~Restore() { set_log_level(level); }
  } restore{previous};
  if (!action) return kExitUsage;
  action();
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  try {
    return run_parsed(args);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const UndefinedMetricError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kExitInvariant;
  }
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

}  // namespace ecd::cli
