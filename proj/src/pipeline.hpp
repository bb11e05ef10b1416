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

// Experiment configuration, the subcommand operations and the two end-to-end
// scenarios with their ablation runners.
//
// Configuration is a JSON object; see default_config() for every key and
// its default. Any string value may reference ${NAME} to pull an environment
// variable. Dotted keys ("training.epochs") address nested values when
// overriding from the command line.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "encoder.hpp"
#include "evaluation.hpp"
#include "llm_gateway.hpp"
#include "supervision.hpp"
#include "training.hpp"

namespace convsdg::pipeline {

using Json = nlohmann::ordered_json;

enum class Scenario { dialogue_unsupervised, query_semisupervised };

struct DataPaths {
  std::filesystem::path collection;
  std::filesystem::path topics;
  std::filesystem::path eval_sessions;
  std::filesystem::path eval_qrels;
  std::filesystem::path train_sessions;
  std::filesystem::path train_qrels;
};

struct EncoderSettings {
  retrieval::EncoderBackend backend = retrieval::EncoderBackend::hashed_projection;
  int dim = retrieval::kDefaultDim;
  int hash_width = retrieval::kDefaultHashWidth;
  int query_max_len = retrieval::kSessionMaxLen;
  int passage_max_len = retrieval::kPassageMaxLen;
  std::uint64_t init_seed = 7;
  std::string endpoint;  // pretrained_transformer only
  std::string model_name;
};

struct PipelineConfig {
  Scenario scenario = Scenario::dialogue_unsupervised;
  std::string dataset = "default";
  std::filesystem::path workspace = "workspace";
  std::uint64_t seed = 13;
  DataPaths data;
  llm::BackendDescriptor backend;
  llm::GenerationParams generation;
  int sessions_per_topic = 1;
  int turns = 8;
  int parallelism = 1;
  int retry_budget = 3;
  int rewrites = 2;
  prf::PrfConfig supervision;
  std::string supervision_retriever = "bm25";
  EncoderSettings encoder;
  train::TrainConfig training;
  std::string retrieval_mode = "dense-exact";
  int retrieval_k = 100;
  std::string metrics = "mrr,ndcg@3,recall@100";
  int rel_threshold = 1;
};

Json default_config();
// Defaults overlaid with the file's values. Relative workspace and data
// paths in the file resolve against its directory.
Json load_config_file(const std::filesystem::path& path);
// Sets a dotted key. The value is parsed as JSON when possible, else taken
// as a string.
void set_config_value(Json& config, const std::string& dotted_key, const std::string& value);
// Expands ${NAME} references and converts to typed settings. Throws
// InvalidArgument on unknown keys, bad types or unset variables.
PipelineConfig parse_config(const Json& config);

std::string_view scenario_name(Scenario s);

// Per-stage seeds derived from the global one.
std::uint64_t generation_seed(const PipelineConfig& cfg);
std::uint64_t augmentation_seed(const PipelineConfig& cfg);
std::uint64_t supervision_seed(const PipelineConfig& cfg);
std::uint64_t training_seed(const PipelineConfig& cfg);

// Subcommand operations. Each writes its outputs and returns a JSON report.
Json generate_dialogue(const PipelineConfig& cfg, const std::filesystem::path& topics,
                       const std::filesystem::path& out_sessions);
Json augment_queries(const PipelineConfig& cfg, const std::filesystem::path& sessions,
                     const std::filesystem::path& qrels,
                     const std::filesystem::path& out_sessions,
                     const std::filesystem::path& out_qrels);
Json build_supervision(const PipelineConfig& cfg, const std::filesystem::path& sessions,
                       const std::filesystem::path& collection,
                       const std::filesystem::path& out_qrels);
Json train_encoder(const PipelineConfig& cfg, const std::filesystem::path& sessions,
                   const std::filesystem::path& qrels,
                   const std::filesystem::path& collection,
                   const std::filesystem::path& out_encoder);
// An empty encoder path retrieves with the untrained query encoder.
Json retrieve(const PipelineConfig& cfg, const std::filesystem::path& queries,
              const std::filesystem::path& collection, const std::filesystem::path& encoder,
              const std::filesystem::path& out_run);

struct EvaluationOutput {
  std::string per_query_tsv;
  Json summary;
};
// An empty compare path skips the paired t-test.
EvaluationOutput evaluate(const PipelineConfig& cfg, const std::filesystem::path& run,
                          const std::filesystem::path& qrels,
                          const std::filesystem::path& compare = {});

// Runs the configured scenario in the workspace and writes manifest.json.
// With resume, a stage whose outputs all exist is skipped.
Json run_pipeline(const PipelineConfig& cfg, bool resume);

// CSV with header "dataset,fraction,<metrics>"; rows in ascending fraction.
std::string run_data_size_ablation(const PipelineConfig& cfg,
                                   std::vector<double> fractions = {0.25, 0.5, 0.75, 1.0},
                                   bool resume = true);
// CSV with header "dataset,form,<metrics>"; rows qa, qat, cqt, cqat.
std::string run_query_form_ablation(const PipelineConfig& cfg, bool resume = true);

// Writes the synthetic desk corpus into dir together with a config.json
// that runs either scenario on it. Returns the config path.
std::filesystem::path make_fixture(const std::filesystem::path& dir, std::uint64_t seed);

std::string sha256_file(const std::filesystem::path& path);

}  // namespace convsdg::pipeline
