// Copyright 2026 The ConvSDG Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <memory>
#include <regex>
#include <sstream>

#include <openssl/evp.h>

#include "bm25.hpp"
#include "datamodel.hpp"
#include "dense_index.hpp"
#include "errors.hpp"
#include "query_aug.hpp"
#include "retriever.hpp"
#include "session_gen.hpp"
#include "synthetic.hpp"
#include "text.hpp"

namespace convsdg::pipeline {

namespace fs = std::filesystem;
using retrieval::EncoderBackend;
using retrieval::EncoderRole;
using retrieval::HashedProjectionEncoder;

namespace {

// ---------------------------------------------------------------- config

void overlay(Json& base, const Json& patch, const std::string& prefix) {
  if (!patch.is_object()) throw InvalidArgument("config '" + prefix + "' must be an object");
  for (const auto& [key, value] : patch.items()) {
    const auto name = prefix.empty() ? key : prefix + "." + key;
    if (!base.contains(key)) throw InvalidArgument("unknown config key '" + name + "'");
    if (base[key].is_object())
      overlay(base[key], value, name);
    else
      base[key] = value;
  }
}

std::string expand_env(const std::string& raw, const std::string& key) {
  static const std::regex ref(R"(\$\{([A-Za-z_][A-Za-z0-9_]*)\})");
  std::string out;
  auto begin = std::sregex_iterator(raw.begin(), raw.end(), ref);
  std::size_t last = 0;
  for (auto it = begin; it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    out.append(raw, last, static_cast<std::size_t>(m.position()) - last);
    const auto name = m[1].str();
    const char* value = std::getenv(name.c_str());
    if (value == nullptr)
      throw InvalidArgument("config key '" + key + "' references unset variable '" + name + "'");
    out += value;
    last = static_cast<std::size_t>(m.position() + m.length());
  }
  out.append(raw, last);
  return out;
}

class Reader {
 public:
  explicit Reader(const Json& root) : root_(root) {}

  const Json& node(const std::string& dotted) const {
    const Json* cur = &root_;
    for (const auto& part : split(dotted, '.')) {
      if (!cur->is_object() || !cur->contains(part))
        throw InvalidArgument("config is missing '" + dotted + "'");
      cur = &(*cur)[part];
    }
    return *cur;
  }

  std::string str(const std::string& key) const {
    const auto& n = node(key);
    if (!n.is_string()) throw InvalidArgument("config '" + key + "' must be a string");
    return expand_env(n.get<std::string>(), key);
  }

  long long integer(const std::string& key) const {
    const auto& n = node(key);
    if (!n.is_number_integer()) throw InvalidArgument("config '" + key + "' must be an integer");
    return n.get<long long>();
  }

  int positive(const std::string& key) const {
    const auto v = integer(key);
    if (v < 1 || v > 1'000'000'000) throw InvalidArgument("config '" + key + "' must be >= 1");
    return static_cast<int>(v);
  }

  double number(const std::string& key) const {
    const auto& n = node(key);
    if (!n.is_number()) throw InvalidArgument("config '" + key + "' must be a number");
    return n.get<double>();
  }

 private:
  const Json& root_;
};

// ---------------------------------------------------------------- helpers

std::unique_ptr<retrieval::Encoder> passage_encoder(const EncoderSettings& e) {
  if (e.backend == EncoderBackend::pretrained_transformer)
    return std::make_unique<retrieval::RemoteEmbeddingEncoder>(
        EncoderRole::passage, e.dim, e.passage_max_len,
        retrieval::RemoteEmbeddingEncoder::Options{e.endpoint, e.model_name});
  return std::make_unique<HashedProjectionEncoder>(HashedProjectionEncoder::random_init(
      EncoderRole::passage, e.dim, e.hash_width, e.passage_max_len, e.init_seed));
}

// The untrained query encoder shares the passage encoder's weights.
HashedProjectionEncoder initial_query_encoder(const EncoderSettings& e) {
  if (e.backend != EncoderBackend::hashed_projection)
    throw InvalidArgument("only the hashed_projection encoder can be fine-tuned");
  return HashedProjectionEncoder::random_init(EncoderRole::passage, e.dim, e.hash_width,
                                              e.passage_max_len, e.init_seed)
      .with_role(EncoderRole::query, e.query_max_len);
}

std::unique_ptr<retrieval::Encoder> query_encoder(const EncoderSettings& e,
                                                  const fs::path& checkpoint) {
  if (!checkpoint.empty()) {
    auto enc = retrieval::load_encoder(checkpoint, EncoderRole::query, e.query_max_len);
    if (enc.dim() != e.dim)
      throw InvalidArgument("encoder checkpoint dim " + std::to_string(enc.dim()) +
                            " differs from configured dim " + std::to_string(e.dim));
    return std::make_unique<HashedProjectionEncoder>(std::move(enc));
  }
  if (e.backend == EncoderBackend::pretrained_transformer)
    return std::make_unique<retrieval::RemoteEmbeddingEncoder>(
        EncoderRole::query, e.dim, e.query_max_len,
        retrieval::RemoteEmbeddingEncoder::Options{e.endpoint, e.model_name});
  return std::make_unique<HashedProjectionEncoder>(initial_query_encoder(e));
}

struct SearchSetup {
  std::unique_ptr<retrieval::Bm25Index> bm25;
  std::unique_ptr<retrieval::DenseIndex> dense;
  retrieval::SearchMode mode = retrieval::SearchMode::exact;
};

SearchSetup prepare_search(const std::string& mode, const PassageCollection& collection,
                           const EncoderSettings& e) {
  SearchSetup s;
  if (mode == "bm25") {
    s.bm25 = std::make_unique<retrieval::Bm25Index>(collection);
    return s;
  }
  if (mode != "dense-exact" && mode != "dense-ann")
    throw InvalidArgument("unknown retrieval mode '" + mode +
                          "' (expected bm25, dense-exact or dense-ann)");
  auto penc = passage_encoder(e);
  s.dense = std::make_unique<retrieval::DenseIndex>(retrieval::DenseIndex::build(collection, *penc));
  if (mode == "dense-ann") {
    s.mode = retrieval::SearchMode::ann;
    s.dense->prepare_ann();
  }
  return s;
}

RankedRun search_sessions(const std::vector<ConversationSession>& sessions,
                          const SearchSetup& setup, const retrieval::Encoder* qenc, int k,
                          int max_concat_len) {
  if (k < 1) throw InvalidArgument("k must be >= 1");
  RankedRun run;
  for (const auto& s : sessions) {
    for (std::size_t i = 0; i < s.turns.size(); ++i) {
      const auto text = train::reformulate_query(s, static_cast<int>(i) + 1, max_concat_len);
      std::vector<ScoredPassage> hits;
      if (setup.bm25) {
        hits = retrieval::LexicalRetriever(*setup.bm25).search(text, k);
      } else {
        hits = retrieval::dense_search(retrieval::to_float(qenc->encode(text)), *setup.dense, k,
                                       setup.mode);
      }
      run.set_ranking(s.turns[i].turn_id, std::move(hits));
    }
  }
  return run;
}

train::TrainConfig training_config(const PipelineConfig& cfg) {
  auto tc = cfg.training;
  tc.seed = training_seed(cfg);
  return tc;
}

struct Trained {
  HashedProjectionEncoder encoder;
  train::TrainingReport report;
};

Trained train_examples(const PipelineConfig& cfg,
                       const std::vector<train::TrainingExample>& examples,
                       const PassageCollection& collection) {
  auto qenc = initial_query_encoder(cfg.encoder);
  auto penc = passage_encoder(cfg.encoder);
  auto report = train::train(examples, qenc, *penc, collection, training_config(cfg));
  return {std::move(qenc), std::move(report)};
}

eval::EvaluationTable evaluate_encoder(const PipelineConfig& cfg,
                                       const retrieval::Encoder& qenc,
                                       const PassageCollection& collection,
                                       const std::vector<ConversationSession>& eval_sessions,
                                       const Qrels& eval_qrels, const SearchSetup& setup) {
  const auto run = search_sessions(eval_sessions, setup, &qenc, cfg.retrieval_k,
                                   cfg.training.max_concat_len);
  (void)collection;
  return eval::evaluate_run(run, eval_qrels, eval::parse_metrics(cfg.metrics),
                            cfg.rel_threshold);
}

Json report_json(const train::TrainingReport& r) {
  Json j;
  j["epoch_mean_loss"] = r.epoch_mean_loss;
  j["steps"] = r.steps;
  j["examples_used"] = r.examples_used;
  j["collisions"] = r.collisions;
  j["dropped_examples"] = r.dropped_examples;
  j["skipped_items"] = r.skipped_items;
  return j;
}

Json means_json(const eval::EvaluationTable& t) {
  Json j = Json::object();
  for (std::size_t i = 0; i < t.metric_names.size(); ++i) j[t.metric_names[i]] = t.means[i];
  return j;
}

Json t_test_json(const eval::EvaluationTable& a, const eval::EvaluationTable& b) {
  Json j = Json::object();
  if (a.per_query.size() < 2) return j;
  for (std::size_t i = 0; i < a.metric_names.size(); ++i) {
    const auto r = eval::paired_t_test(a.column(i), b.column(i));
    j[a.metric_names[i]] = {{"t", r.t}, {"p", r.p}};
  }
  return j;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9f", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

void require_file(const fs::path& p, const std::string& key) {
  if (p.empty()) throw InvalidArgument("config is missing '" + key + "'");
  if (!fs::is_regular_file(p))
    throw InvalidArgument("config '" + key + "' names a missing file: " + p.string());
}

void validate_for(const PipelineConfig& cfg, Scenario scenario) {
  require_file(cfg.data.collection, "data.collection");
  if (scenario == Scenario::dialogue_unsupervised) {
    require_file(cfg.data.topics, "data.topics");
  } else {
    require_file(cfg.data.train_sessions, "data.train_sessions");
    require_file(cfg.data.train_qrels, "data.train_qrels");
  }
  require_file(cfg.data.eval_sessions, "data.eval_sessions");
  require_file(cfg.data.eval_qrels, "data.eval_qrels");
  eval::parse_metrics(cfg.metrics);
}

// ---------------------------------------------------------------- stages

struct Stage {
  std::string name;
  std::vector<fs::path> inputs;
  std::vector<fs::path> outputs;
  std::function<Json()> body;
};

class StageRunner {
 public:
  StageRunner(const PipelineConfig& cfg, bool resume) : cfg_(cfg), resume_(resume) {}

  void run(const Stage& stage) {
    Json entry;
    entry["name"] = stage.name;
    bool skip = resume_;
    for (const auto& out : stage.outputs) skip = skip && fs::exists(out);
    if (!skip) {
      try {
        for (const auto& out : stage.outputs) fs::create_directories(out.parent_path());
        entry["report"] = stage.body();
      } catch (const Error& e) {
        std::string inputs;
        for (const auto& in : stage.inputs) inputs += (inputs.empty() ? "" : ", ") + in.string();
        throw StageFailed(stage.name, std::string(e.what()) + " (inputs: " + inputs + ")");
      } catch (const std::exception& e) {
        std::string inputs;
        for (const auto& in : stage.inputs) inputs += (inputs.empty() ? "" : ", ") + in.string();
        throw StageFailed(stage.name, std::string(e.what()) + " (inputs: " + inputs + ")");
      }
    }
    entry["executed"] = !skip;
    Json ins = Json::array(), outs = Json::array();
    for (const auto& in : stage.inputs) ins.push_back(in.string());
    for (const auto& out : stage.outputs) {
      outs.push_back(relative(out));
      artifacts_.push_back({{"stage", stage.name},
                            {"path", relative(out)},
                            {"sha256", sha256_file(out)},
                            {"bytes", fs::file_size(out)}});
    }
    entry["inputs"] = ins;
    entry["outputs"] = outs;
    stages_.push_back(entry);
    if (!skip) ++executed_;
  }

  Json manifest() const {
    Json m;
    m["scenario"] = scenario_name(cfg_.scenario);
    m["dataset"] = cfg_.dataset;
    m["seed"] = cfg_.seed;
    m["stages_executed"] = executed_;
    m["stages"] = stages_;
    m["artifacts"] = artifacts_;
    return m;
  }

 private:
  std::string relative(const fs::path& p) const {
    return p.lexically_relative(cfg_.workspace).generic_string();
  }

  const PipelineConfig& cfg_;
  bool resume_;
  int executed_ = 0;
  Json stages_ = Json::array();
  Json artifacts_ = Json::array();
};

struct Workspace {
  fs::path sessions, pseudo_qrels, augmented_sessions, augmented_qrels, merged_sessions,
      merged_qrels, encoder, run, report, manifest;

  explicit Workspace(const fs::path& ws)
      : sessions(ws / "sessions.jsonl"),
        pseudo_qrels(ws / "pseudo_qrels.txt"),
        augmented_sessions(ws / "augmented_sessions.jsonl"),
        augmented_qrels(ws / "augmented_qrels.txt"),
        merged_sessions(ws / "merged_sessions.jsonl"),
        merged_qrels(ws / "merged_qrels.txt"),
        encoder(ws / "query_encoder.bin"),
        run(ws / "run.txt"),
        report(ws / "report.json"),
        manifest(ws / "manifest.json") {}
};

Stage generate_stage(const PipelineConfig& cfg, const Workspace& w) {
  return {"generate", {cfg.data.topics}, {w.sessions},
          [&cfg, &w] { return generate_dialogue(cfg, cfg.data.topics, w.sessions); }};
}

Stage supervise_stage(const PipelineConfig& cfg, const Workspace& w) {
  return {"supervise", {w.sessions, cfg.data.collection}, {w.pseudo_qrels}, [&cfg, &w] {
            return build_supervision(cfg, w.sessions, cfg.data.collection, w.pseudo_qrels);
          }};
}

Stage augment_stage(const PipelineConfig& cfg, const Workspace& w) {
  return {"augment",
          {cfg.data.train_sessions, cfg.data.train_qrels},
          {w.augmented_sessions, w.augmented_qrels},
          [&cfg, &w] {
            return augment_queries(cfg, cfg.data.train_sessions, cfg.data.train_qrels,
                                   w.augmented_sessions, w.augmented_qrels);
          }};
}

Stage merge_stage(const PipelineConfig& cfg, const Workspace& w) {
  return {"merge",
          {cfg.data.train_sessions, cfg.data.train_qrels, w.augmented_sessions,
           w.augmented_qrels},
          {w.merged_sessions, w.merged_qrels},
          [&cfg, &w] {
            aug::Dataset original{read_sessions(cfg.data.train_sessions),
                                  read_qrels(cfg.data.train_qrels)};
            aug::Dataset augmented{read_sessions(w.augmented_sessions),
                                   read_qrels(w.augmented_qrels)};
            const auto merged = aug::merge_datasets(original, augmented);
            write_sessions(merged.sessions, w.merged_sessions);
            write_qrels(merged.qrels, w.merged_qrels);
            return Json{{"turns", aug::count_judged_turns(merged)},
                        {"original_turns", aug::count_judged_turns(original)}};
          }};
}

// Generated (or augmented) training data of the configured scenario, made
// available in the workspace.
struct TrainingData {
  std::vector<train::TrainingExample> fixed;      // always used
  std::vector<train::TrainingExample> generated;  // subject to subsampling
};

TrainingData ensure_training_data(const PipelineConfig& cfg, StageRunner& runner,
                                  const Workspace& w) {
  TrainingData d;
  const int len = cfg.training.max_concat_len;
  if (cfg.scenario == Scenario::dialogue_unsupervised) {
    runner.run(generate_stage(cfg, w));
    runner.run(supervise_stage(cfg, w));
    d.generated = train::build_training_examples(
        read_sessions(w.sessions), read_qrels(w.pseudo_qrels, QrelsSource::pseudo), len,
        cfg.rel_threshold);
  } else {
    runner.run(augment_stage(cfg, w));
    d.fixed = train::build_training_examples(read_sessions(cfg.data.train_sessions),
                                             read_qrels(cfg.data.train_qrels), len,
                                             cfg.rel_threshold);
    d.generated = train::build_training_examples(
        read_sessions(w.augmented_sessions), read_qrels(w.augmented_qrels), len,
        cfg.rel_threshold);
  }
  return d;
}

struct EvalData {
  PassageCollection collection;
  std::vector<ConversationSession> sessions;
  Qrels qrels;
};

EvalData load_eval(const PipelineConfig& cfg) {
  return {load_collection(cfg.data.collection), read_sessions(cfg.data.eval_sessions),
          read_qrels(cfg.data.eval_qrels)};
}

std::string csv_header(const PipelineConfig& cfg, const std::string& key) {
  std::string h = "dataset," + key;
  for (const auto& m : eval::parse_metrics(cfg.metrics)) h += "," + m.name;
  return h + "\n";
}

std::string csv_values(const eval::EvaluationTable& t) {
  std::string row;
  for (double v : t.means) row += "," + fmt(v);
  return row + "\n";
}

}  // namespace

// -------------------------------------------------------------- public API

Json default_config() {
  return Json{
      {"scenario", "dialogue_unsupervised"},
      {"dataset", "default"},
      {"workspace", "workspace"},
      {"seed", 13},
      {"data",
       {{"collection", ""},
        {"topics", ""},
        {"eval_sessions", ""},
        {"eval_qrels", ""},
        {"train_sessions", ""},
        {"train_qrels", ""}}},
      {"backend",
       {{"kind", "mock"},
        {"endpoint", ""},
        {"model", "gpt-3.5-turbo"},
        {"rate_limit", 60},
        {"max_retries", 3},
        {"timeout_seconds", 60.0},
        {"max_in_flight", 4},
        {"backoff_ms", 500},
        {"api_key_env", "CONVSDG_API_KEY"}}},
      {"generation",
       {{"temperature", 1.0},
        {"max_output_tokens", 1024},
        {"sessions_per_topic", 1},
        {"turns", gen::kDefaultTurns},
        {"parallelism", 1},
        {"retry_budget", gen::kParseRetryBudget}}},
      {"augmentation", {{"t", aug::kDefaultRewrites}}},
      {"supervision", {{"form", "qat"}, {"top_k", 5}, {"m", 3}, {"retriever", "bm25"}}},
      {"encoder",
       {{"backend", "hashed_projection"},
        {"dim", retrieval::kDefaultDim},
        {"hash_width", retrieval::kDefaultHashWidth},
        {"query_max_len", retrieval::kSessionMaxLen},
        {"passage_max_len", retrieval::kPassageMaxLen},
        {"init_seed", 7},
        {"endpoint", ""},
        {"model", ""}}},
      {"training",
       {{"batch_size", 16},
        {"epochs", 5},
        {"learning_rate", 1e-5},
        {"max_concat_len", retrieval::kSessionMaxLen}}},
      {"retrieval", {{"mode", "dense-exact"}, {"k", 100}}},
      {"evaluation", {{"metrics", "mrr,ndcg@3,recall@100"}, {"rel_threshold", 1}}},
  };
}

Json load_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  Json file;
  try {
    file = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw FormatError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  auto cfg = default_config();
  overlay(cfg, file, "");
  // Paths written in the file are relative to the file.
  const auto base = path.parent_path();
  auto anchor = [&](Json& value) {
    if (!value.is_string()) return;
    const auto s = value.get<std::string>();
    if (s.empty() || s.find("${") != std::string::npos) return;
    const fs::path p(s);
    if (p.is_relative()) value = (base / p).lexically_normal().string();
  };
  if (file.contains("workspace")) anchor(cfg["workspace"]);
  if (file.contains("data"))
    for (auto& [key, value] : cfg["data"].items())
      if (file["data"].contains(key)) anchor(value);
  return cfg;
}

void set_config_value(Json& config, const std::string& dotted_key, const std::string& value) {
  Json* cur = &config;
  const auto parts = split(dotted_key, '.');
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (!cur->is_object() || !cur->contains(parts[i]))
      throw InvalidArgument("unknown config key '" + dotted_key + "'");
    cur = &(*cur)[parts[i]];
  }
  if (cur->is_object()) throw InvalidArgument("config key '" + dotted_key + "' is a section");
  if (cur->is_string()) {
    *cur = value;
    return;
  }
  try {
    *cur = Json::parse(value);
  } catch (const Json::parse_error&) {
    throw InvalidArgument("config key '" + dotted_key + "' expects a number, got '" + value + "'");
  }
}

std::string_view scenario_name(Scenario s) {
  return s == Scenario::dialogue_unsupervised ? "dialogue_unsupervised" : "query_semisupervised";
}

PipelineConfig parse_config(const Json& config) {
  auto full = default_config();
  overlay(full, config, "");
  const Reader r(full);
  PipelineConfig c;

  const auto scenario = r.str("scenario");
  if (scenario == "dialogue_unsupervised")
    c.scenario = Scenario::dialogue_unsupervised;
  else if (scenario == "query_semisupervised")
    c.scenario = Scenario::query_semisupervised;
  else
    throw InvalidArgument("unknown scenario '" + scenario +
                          "' (expected dialogue_unsupervised or query_semisupervised)");
  c.dataset = r.str("dataset");
  if (c.dataset.empty() || c.dataset.find_first_of(",\n\"") != std::string::npos)
    throw InvalidArgument("config 'dataset' must be a non-empty name without commas");
  c.workspace = r.str("workspace");
  if (c.workspace.empty()) throw InvalidArgument("config 'workspace' must not be empty");
  const auto seed = r.integer("seed");
  if (seed < 0) throw InvalidArgument("config 'seed' must be >= 0");
  c.seed = static_cast<std::uint64_t>(seed);

  c.data.collection = r.str("data.collection");
  c.data.topics = r.str("data.topics");
  c.data.eval_sessions = r.str("data.eval_sessions");
  c.data.eval_qrels = r.str("data.eval_qrels");
  c.data.train_sessions = r.str("data.train_sessions");
  c.data.train_qrels = r.str("data.train_qrels");

  const auto kind = r.str("backend.kind");
  if (kind == "mock")
    c.backend.kind = llm::BackendKind::mock;
  else if (kind == "http")
    c.backend.kind = llm::BackendKind::http_chat;
  else
    throw InvalidArgument("unknown backend '" + kind + "' (expected mock or http)");
  c.backend.endpoint = r.str("backend.endpoint");
  c.backend.model_name = r.str("backend.model");
  c.backend.rate_limit = r.positive("backend.rate_limit");
  c.backend.max_retries = r.positive("backend.max_retries");
  c.backend.timeout_seconds = r.number("backend.timeout_seconds");
  if (!(c.backend.timeout_seconds > 0)) throw InvalidArgument("config 'backend.timeout_seconds' must be > 0");
  c.backend.max_in_flight = r.positive("backend.max_in_flight");
  const auto backoff = r.integer("backend.backoff_ms");
  if (backoff < 0) throw InvalidArgument("config 'backend.backoff_ms' must be >= 0");
  c.backend.backoff_base = std::chrono::milliseconds(backoff);
  c.backend.api_key_env = r.str("backend.api_key_env");

  c.generation.temperature = r.number("generation.temperature");
  if (c.generation.temperature < 0) throw InvalidArgument("config 'generation.temperature' must be >= 0");
  c.generation.max_output_tokens = r.positive("generation.max_output_tokens");
  c.sessions_per_topic = r.positive("generation.sessions_per_topic");
  c.turns = r.positive("generation.turns");
  c.parallelism = r.positive("generation.parallelism");
  c.retry_budget = r.positive("generation.retry_budget");
  c.rewrites = r.positive("augmentation.t");

  c.supervision.form = prf::parse_form(r.str("supervision.form"));
  c.supervision.top_k = r.positive("supervision.top_k");
  c.supervision.m = r.positive("supervision.m");
  if (c.supervision.m > c.supervision.top_k)
    throw InvalidArgument("config 'supervision.m' must not exceed 'supervision.top_k'");
  c.supervision_retriever = r.str("supervision.retriever");
  if (c.supervision_retriever != "bm25" && c.supervision_retriever != "dense")
    throw InvalidArgument("unknown supervision retriever '" + c.supervision_retriever +
                          "' (expected bm25 or dense)");

  const auto backend = r.str("encoder.backend");
  if (backend == "hashed_projection")
    c.encoder.backend = EncoderBackend::hashed_projection;
  else if (backend == "pretrained_transformer")
    c.encoder.backend = EncoderBackend::pretrained_transformer;
  else
    throw InvalidArgument("unknown encoder backend '" + backend +
                          "' (expected hashed_projection or pretrained_transformer)");
  c.encoder.dim = r.positive("encoder.dim");
  c.encoder.hash_width = r.positive("encoder.hash_width");
  c.encoder.query_max_len = r.positive("encoder.query_max_len");
  c.encoder.passage_max_len = r.positive("encoder.passage_max_len");
  const auto init_seed = r.integer("encoder.init_seed");
  if (init_seed < 0) throw InvalidArgument("config 'encoder.init_seed' must be >= 0");
  c.encoder.init_seed = static_cast<std::uint64_t>(init_seed);
  c.encoder.endpoint = r.str("encoder.endpoint");
  c.encoder.model_name = r.str("encoder.model");

  c.training.batch_size = r.positive("training.batch_size");
  c.training.epochs = r.positive("training.epochs");
  c.training.learning_rate = r.number("training.learning_rate");
  if (!(c.training.learning_rate >= 0))
    throw InvalidArgument("config 'training.learning_rate' must be >= 0");
  c.training.max_concat_len = r.positive("training.max_concat_len");

  c.retrieval_mode = r.str("retrieval.mode");
  c.retrieval_k = r.positive("retrieval.k");
  c.metrics = r.str("evaluation.metrics");
  eval::parse_metrics(c.metrics);
  c.rel_threshold = r.positive("evaluation.rel_threshold");
  return c;
}

std::uint64_t generation_seed(const PipelineConfig& cfg) { return mix_seed(cfg.seed, 1); }
std::uint64_t augmentation_seed(const PipelineConfig& cfg) { return mix_seed(cfg.seed, 2); }
std::uint64_t supervision_seed(const PipelineConfig& cfg) { return mix_seed(cfg.seed, 3); }
std::uint64_t training_seed(const PipelineConfig& cfg) { return mix_seed(cfg.seed, 4); }

Json generate_dialogue(const PipelineConfig& cfg, const fs::path& topics,
                       const fs::path& out_sessions) {
  const auto topic_list = read_topics(topics);
  auto backend = llm::make_backend(cfg.backend);
  auto params = cfg.generation;
  params.seed = generation_seed(cfg);
  gen::CorpusOptions opts{cfg.sessions_per_topic, cfg.turns, cfg.parallelism, cfg.retry_budget};
  const auto corpus = gen::generate_session_corpus(topic_list, opts, *backend, params);
  write_sessions(corpus.sessions, out_sessions);
  std::size_t turns = 0;
  for (const auto& s : corpus.sessions) turns += s.turns.size();
  return Json{{"requested", corpus.report.requested},
              {"produced", corpus.report.produced},
              {"failed", corpus.report.failed},
              {"failures", corpus.report.failures},
              {"turns", turns}};
}

Json augment_queries(const PipelineConfig& cfg, const fs::path& sessions, const fs::path& qrels,
                     const fs::path& out_sessions, const fs::path& out_qrels) {
  aug::Dataset original{read_sessions(sessions), read_qrels(qrels)};
  auto backend = llm::make_backend(cfg.backend);
  aug::AugmentationConfig ac;
  ac.t = cfg.rewrites;
  ac.params = cfg.generation;
  ac.params.seed = augmentation_seed(cfg);
  ac.retry_budget = cfg.retry_budget;
  ac.parallelism = cfg.parallelism;
  const auto result = aug::augment_dataset(original, ac, *backend);
  write_sessions(result.augmented.sessions, out_sessions);
  write_qrels(result.augmented.qrels, out_qrels);
  const auto& r = result.report;
  return Json{{"annotated_turns", r.annotated_turns},
              {"skipped_turns", r.skipped_turns},
              {"augmented_turns", r.augmented_turns},
              {"degenerate_rewrites", r.degenerate_rewrites},
              {"substituted_rewrites", r.substituted_rewrites},
              {"merged_turns", r.annotated_turns + r.augmented_turns}};
}

Json build_supervision(const PipelineConfig& cfg, const fs::path& sessions,
                       const fs::path& collection, const fs::path& out_qrels) {
  const auto session_list = read_sessions(sessions);
  const auto coll = load_collection(collection);
  auto pc = cfg.supervision;
  pc.seed = supervision_seed(cfg);
  prf::PrfResult result;
  if (cfg.supervision_retriever == "bm25") {
    const retrieval::Bm25Index index(coll);
    result = prf::assign_pseudo_labels(session_list, retrieval::LexicalRetriever(index), pc);
  } else {
    auto penc = passage_encoder(cfg.encoder);
    const auto index = retrieval::DenseIndex::build(coll, *penc);
    auto qenc = query_encoder(cfg.encoder, {});
    result = prf::assign_pseudo_labels(
        session_list, retrieval::DenseRetriever(*qenc, index, retrieval::SearchMode::exact), pc);
  }
  write_qrels(result.qrels, out_qrels);
  return Json{{"form", prf::form_code(pc.form)},
              {"labeled_turns", result.report.labeled_turns},
              {"skipped_turns", result.report.skipped_turns},
              {"judgments", result.qrels.size()}};
}

Json train_encoder(const PipelineConfig& cfg, const fs::path& sessions, const fs::path& qrels,
                   const fs::path& collection, const fs::path& out_encoder) {
  const auto coll = load_collection(collection);
  const auto examples = train::build_training_examples(
      read_sessions(sessions), read_qrels(qrels), cfg.training.max_concat_len,
      cfg.rel_threshold);
  if (examples.empty()) throw InvalidArgument("no judged turn to train on");
  auto trained = train_examples(cfg, examples, coll);
  retrieval::save_encoder(trained.encoder, out_encoder);
  auto j = report_json(trained.report);
  j["examples"] = examples.size();
  return j;
}

Json retrieve(const PipelineConfig& cfg, const fs::path& queries, const fs::path& collection,
              const fs::path& encoder, const fs::path& out_run) {
  const auto sessions = read_sessions(queries);
  const auto coll = load_collection(collection);
  const auto setup = prepare_search(cfg.retrieval_mode, coll, cfg.encoder);
  std::unique_ptr<retrieval::Encoder> qenc;
  if (!setup.bm25) qenc = query_encoder(cfg.encoder, encoder);
  const auto run = search_sessions(sessions, setup, qenc.get(), cfg.retrieval_k,
                                   cfg.training.max_concat_len);
  write_run(run, out_run);
  return Json{{"mode", cfg.retrieval_mode},
              {"k", cfg.retrieval_k},
              {"queries", run.by_query.size()},
              {"encoder", encoder.empty() ? "untrained" : encoder.string()}};
}

EvaluationOutput evaluate(const PipelineConfig& cfg, const fs::path& run, const fs::path& qrels,
                          const fs::path& compare) {
  const auto metrics = eval::parse_metrics(cfg.metrics);
  const auto judged = read_qrels(qrels);
  const auto table = eval::evaluate_run(read_run(run), judged, metrics, cfg.rel_threshold);
  EvaluationOutput out;
  std::ostringstream tsv;
  tsv << "query_id";
  for (const auto& name : table.metric_names) tsv << '\t' << name;
  tsv << '\n';
  for (const auto& [qid, values] : table.per_query) {
    tsv << qid;
    for (double v : values) tsv << '\t' << fmt(v);
    tsv << '\n';
  }
  tsv << "all";
  for (double v : table.means) tsv << '\t' << fmt(v);
  tsv << '\n';
  out.per_query_tsv = tsv.str();
  out.summary["queries"] = table.per_query.size();
  out.summary["metrics"] = means_json(table);
  if (!compare.empty()) {
    const auto other = eval::evaluate_run(read_run(compare), judged, metrics, cfg.rel_threshold);
    out.summary["compare"] = {{"metrics", means_json(other)}, {"t_test", t_test_json(table, other)}};
  }
  return out;
}

Json run_pipeline(const PipelineConfig& cfg, bool resume) {
  validate_for(cfg, cfg.scenario);
  fs::create_directories(cfg.workspace);
  const Workspace w(cfg.workspace);
  StageRunner runner(cfg, resume);

  fs::path train_sessions, train_qrels;
  if (cfg.scenario == Scenario::dialogue_unsupervised) {
    runner.run(generate_stage(cfg, w));
    runner.run(supervise_stage(cfg, w));
    train_sessions = w.sessions;
    train_qrels = w.pseudo_qrels;
  } else {
    runner.run(augment_stage(cfg, w));
    runner.run(merge_stage(cfg, w));
    train_sessions = w.merged_sessions;
    train_qrels = w.merged_qrels;
  }
  runner.run({"train",
              {train_sessions, train_qrels, cfg.data.collection},
              {w.encoder},
              [&] { return train_encoder(cfg, train_sessions, train_qrels, cfg.data.collection, w.encoder); }});
  runner.run({"retrieve",
              {cfg.data.eval_sessions, cfg.data.collection, w.encoder},
              {w.run},
              [&] { return retrieve(cfg, cfg.data.eval_sessions, cfg.data.collection, w.encoder, w.run); }});
  runner.run({"evaluate", {w.run, cfg.data.eval_qrels, cfg.data.eval_sessions}, {w.report}, [&] {
                const auto data = load_eval(cfg);
                const auto metrics = eval::parse_metrics(cfg.metrics);
                const auto tuned = eval::evaluate_run(read_run(w.run), data.qrels, metrics,
                                                      cfg.rel_threshold);
                const auto setup = prepare_search(cfg.retrieval_mode, data.collection, cfg.encoder);
                std::unique_ptr<retrieval::Encoder> zero;
                if (!setup.bm25) zero = query_encoder(cfg.encoder, {});
                const auto zero_run = search_sessions(data.sessions, setup, zero.get(),
                                                      cfg.retrieval_k, cfg.training.max_concat_len);
                const auto base = eval::evaluate_run(zero_run, data.qrels, metrics, cfg.rel_threshold);
                Json report;
                report["dataset"] = cfg.dataset;
                report["scenario"] = scenario_name(cfg.scenario);
                report["queries"] = tuned.per_query.size();
                report["fine_tuned"] = means_json(tuned);
                report["zero_shot"] = means_json(base);
                Json rel = Json::object();
                for (std::size_t i = 0; i < tuned.means.size(); ++i)
                  rel[tuned.metric_names[i]] =
                      base.means[i] > 0 ? Json((tuned.means[i] - base.means[i]) / base.means[i])
                                        : Json(nullptr);
                report["relative_improvement"] = rel;
                report["t_test"] = t_test_json(tuned, base);
                write_text(w.report, report.dump(2) + "\n");
                return report;
              }});
  const auto manifest = runner.manifest();
  write_text(w.manifest, manifest.dump(2) + "\n");
  return manifest;
}

std::string run_data_size_ablation(const PipelineConfig& cfg, std::vector<double> fractions,
                                   bool resume) {
  if (fractions.empty()) throw InvalidArgument("no fractions given");
  for (double f : fractions)
    if (!(f > 0.0 && f <= 1.0))
      throw InvalidArgument("fraction " + fmt(f) + " outside (0, 1]");
  std::sort(fractions.begin(), fractions.end());
  fractions.erase(std::unique(fractions.begin(), fractions.end()), fractions.end());

  validate_for(cfg, cfg.scenario);
  fs::create_directories(cfg.workspace);
  const Workspace w(cfg.workspace);
  StageRunner runner(cfg, resume);
  const auto data = ensure_training_data(cfg, runner, w);
  const auto held_out = load_eval(cfg);
  const auto setup = prepare_search(cfg.retrieval_mode, held_out.collection, cfg.encoder);

  const auto n = data.generated.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(mix_seed(cfg.seed, 0xab1a7eULL));
  rng.shuffle(order);

  std::string csv = csv_header(cfg, "fraction");
  for (double f : fractions) {
    auto keep = static_cast<std::size_t>(std::llround(f * static_cast<double>(n)));
    keep = std::clamp<std::size_t>(keep, std::min<std::size_t>(n, 1), n);
    std::vector<std::size_t> chosen(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep));
    std::sort(chosen.begin(), chosen.end());
    auto examples = data.fixed;
    for (auto i : chosen) examples.push_back(data.generated[i]);
    if (examples.empty()) throw InvalidArgument("no generated turn to train on");
    const auto trained = train_examples(cfg, examples, held_out.collection);
    const auto table = evaluate_encoder(cfg, trained.encoder, held_out.collection,
                                        held_out.sessions, held_out.qrels, setup);
    char frac[32];
    std::snprintf(frac, sizeof frac, "%.2f", f);
    csv += cfg.dataset + "," + frac + csv_values(table);
  }
  write_text(cfg.workspace / "ablation_size.csv", csv);
  return csv;
}

std::string run_query_form_ablation(const PipelineConfig& cfg, bool resume) {
  validate_for(cfg, Scenario::dialogue_unsupervised);
  fs::create_directories(cfg.workspace);
  const Workspace w(cfg.workspace);
  StageRunner runner(cfg, resume);
  runner.run(generate_stage(cfg, w));
  const auto sessions = read_sessions(w.sessions);
  const auto held_out = load_eval(cfg);
  const auto setup = prepare_search(cfg.retrieval_mode, held_out.collection, cfg.encoder);

  std::unique_ptr<retrieval::Bm25Index> bm25;
  std::unique_ptr<retrieval::Retriever> retriever;
  std::unique_ptr<retrieval::Encoder> zero;
  std::unique_ptr<retrieval::DenseIndex> dense;
  if (cfg.supervision_retriever == "bm25") {
    bm25 = std::make_unique<retrieval::Bm25Index>(held_out.collection);
    retriever = std::make_unique<retrieval::LexicalRetriever>(*bm25);
  } else {
    auto penc = passage_encoder(cfg.encoder);
    dense = std::make_unique<retrieval::DenseIndex>(retrieval::DenseIndex::build(held_out.collection, *penc));
    zero = query_encoder(cfg.encoder, {});
    retriever = std::make_unique<retrieval::DenseRetriever>(*zero, *dense, retrieval::SearchMode::exact);
  }

  std::string csv = csv_header(cfg, "form");
  for (auto form : prf::kAllForms) {
    try {
      auto pc = cfg.supervision;
      pc.seed = supervision_seed(cfg);
      pc.form = form;
      const auto labels = prf::assign_pseudo_labels(sessions, *retriever, pc);
      const auto examples = train::build_training_examples(
          sessions, labels.qrels, cfg.training.max_concat_len, cfg.rel_threshold);
      if (examples.empty()) throw InvalidArgument("no pseudo-labeled turn to train on");
      const auto trained = train_examples(cfg, examples, held_out.collection);
      const auto table = evaluate_encoder(cfg, trained.encoder, held_out.collection,
                                          held_out.sessions, held_out.qrels, setup);
      csv += cfg.dataset + "," + std::string(prf::form_code(form)) + csv_values(table);
    } catch (const Error& e) {
      throw StageFailed("ablate-form/" + std::string(prf::form_code(form)),
                        std::string(e.what()) + " (inputs: " + w.sessions.string() + ", " +
                            cfg.data.collection.string() + ")");
    }
  }
  write_text(cfg.workspace / "ablation_form.csv", csv);
  return csv;
}

fs::path make_fixture(const fs::path& dir, std::uint64_t seed) {
  synthetic::FixtureOptions opts;
  opts.seed = seed;
  const auto paths = synthetic::write_desk_fixture(synthetic::make_desk_fixture(opts), dir);
  Json cfg = {
      {"scenario", "dialogue_unsupervised"},
      {"dataset", "desk"},
      {"workspace", "workspace"},
      {"data",
       {{"collection", paths.collection.filename().string()},
        {"topics", paths.topics.filename().string()},
        {"eval_sessions", paths.eval_sessions.filename().string()},
        {"eval_qrels", paths.eval_qrels.filename().string()},
        {"train_sessions", paths.train_sessions.filename().string()},
        {"train_qrels", paths.train_qrels.filename().string()}}},
      {"generation", {{"sessions_per_topic", 5}}},
      {"training", {{"learning_rate", 0.01}}},
  };
  const auto out = dir / "config.json";
  write_text(out, cfg.dump(2) + "\n");
  return out;
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1)
    throw Error("sha256 initialisation failed");
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest, &len);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xf];
  }
  return out;
}

}  // namespace convsdg::pipeline
