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

// convsdg command-line front-end.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "convsdg/convsdg.h"

namespace {

class Failure {
 public:
  explicit Failure(convsdg_status s) : status(s), message(convsdg_last_error()) {}
  convsdg_status status;
  std::string message;
};

void check(convsdg_status s) {
  if (s != CONVSDG_OK) throw Failure(s);
}

struct OwnedString {
  char* p = nullptr;
  ~OwnedString() { convsdg_string_free(p); }
  std::string str() const { return p ? std::string(p) : std::string(); }
};

struct Globals {
  std::string config;
  std::string workspace;
  std::optional<long long> seed;
  bool resume = false;
  std::string backend;
  std::vector<std::string> sets;
};

// Subcommand flags, stored as config overrides when given.
class Overrides {
 public:
  template <typename T>
  void add(CLI::App* app, const std::string& flag, const std::string& key,
           const std::string& help) {
    auto& slot = values_[key];
    app->add_option_function<T>(
        flag,
        [&slot](const T& v) {
          std::ostringstream os;
          os << v;
          slot = os.str();
        },
        help);
  }

  void apply(convsdg_config* cfg) const {
    for (const auto& [key, value] : values_)
      if (value) check(convsdg_config_set(cfg, key.c_str(), value->c_str()));
  }

 private:
  std::map<std::string, std::optional<std::string>> values_;
};

convsdg_config* make_config(const Globals& g, const Overrides& o) {
  convsdg_config* cfg = nullptr;
  check(g.config.empty() ? convsdg_config_new(&cfg) : convsdg_config_load(g.config.c_str(), &cfg));
  try {
    for (const auto& kv : g.sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos || eq == 0)
        throw CLI::ValidationError("--set", "expected KEY=VALUE, got '" + kv + "'");
      check(convsdg_config_set(cfg, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str()));
    }
    if (!g.workspace.empty()) check(convsdg_config_set(cfg, "workspace", g.workspace.c_str()));
    if (g.seed) check(convsdg_config_set(cfg, "seed", std::to_string(*g.seed).c_str()));
    if (!g.backend.empty()) check(convsdg_config_set(cfg, "backend.kind", g.backend.c_str()));
    o.apply(cfg);
  } catch (...) {
    convsdg_config_free(cfg);
    throw;
  }
  return cfg;
}

struct ConfigHandle {
  convsdg_config* p;
  ~ConfigHandle() { convsdg_config_free(p); }
};

const char* opt(const std::string& s) { return s.empty() ? nullptr : s.c_str(); }

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic conversational training data and dense retrieval fine-tuning"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(convsdg_version()));

  Globals g;
  app.add_option("--config", g.config, "JSON configuration file")->check(CLI::ExistingFile);
  app.add_option("--workspace", g.workspace, "Workspace directory for pipeline artifacts");
  app.add_option("--seed", g.seed, "Global random seed")->check(CLI::NonNegativeNumber);
  app.add_flag("--resume", g.resume, "Skip pipeline stages whose outputs exist");
  app.add_option("--backend", g.backend, "LLM backend")->check(CLI::IsMember({"mock", "http"}));
  app.add_option("--set", g.sets, "Override a config value, KEY=VALUE (repeatable)");

  Overrides o;
  std::function<void()> action;

  // generate-dialogue
  std::string topics, out;
  auto* gen = app.add_subcommand("generate-dialogue", "Generate dialogue sessions from topics");
  gen->add_option("--topics", topics, "Topics JSONL")->required()->check(CLI::ExistingFile);
  o.add<int>(gen, "--sessions-per-topic", "generation.sessions_per_topic", "Sessions per topic");
  o.add<int>(gen, "--turns", "generation.turns", "Turns per session");
  o.add<int>(gen, "--parallelism", "generation.parallelism", "Concurrent generations");
  gen->add_option("--out", out, "Output sessions JSONL")->required();
  gen->callback([&] {
    action = [&] {
      ConfigHandle cfg{make_config(g, o)};
      OwnedString report;
      check(convsdg_generate_dialogue(cfg.p, topics.c_str(), out.c_str(), &report.p));
      std::cout << report.str() << "\n";
    };
  });

  // augment-queries
  std::string sessions, qrels, out_sessions, out_qrels;
  auto* augq = app.add_subcommand("augment-queries", "Rewrite judged turns with the LLM");
  augq->add_option("--sessions", sessions, "Sessions JSONL")->required()->check(CLI::ExistingFile);
  augq->add_option("--qrels", qrels, "Manual qrels")->required()->check(CLI::ExistingFile);
  o.add<int>(augq, "--t", "augmentation.t", "Rewrites per judged turn");
  augq->add_option("--out-sessions", out_sessions, "Augmented sessions JSONL")->required();
  augq->add_option("--out-qrels", out_qrels, "Augmented qrels")->required();
  augq->callback([&] {
    action = [&] {
      ConfigHandle cfg{make_config(g, o)};
      OwnedString report;
      check(convsdg_augment_queries(cfg.p, sessions.c_str(), qrels.c_str(), out_sessions.c_str(),
                                    out_qrels.c_str(), &report.p));
      std::cout << report.str() << "\n";
    };
  });

  // build-supervision
  std::string collection;
  auto* sup = app.add_subcommand("build-supervision", "Pseudo-label sessions from retrieval");
  sup->add_option("--sessions", sessions, "Sessions JSONL")->required()->check(CLI::ExistingFile);
  sup->add_option("--collection", collection, "Passage TSV")->required()->check(CLI::ExistingFile);
  o.add<std::string>(sup, "--form", "supervision.form", "Query form: qa, qat, cqt or cqat");
  o.add<int>(sup, "--top-k", "supervision.top_k", "Candidates retrieved per turn");
  o.add<int>(sup, "--m", "supervision.m", "Pseudo-positives sampled per turn");
  o.add<std::string>(sup, "--retriever", "supervision.retriever", "bm25 or dense");
  sup->add_option("--out-qrels", out_qrels, "Pseudo qrels output")->required();
  sup->callback([&] {
    action = [&] {
      ConfigHandle cfg{make_config(g, o)};
      OwnedString report;
      check(convsdg_build_supervision(cfg.p, sessions.c_str(), collection.c_str(),
                                      out_qrels.c_str(), &report.p));
      std::cout << report.str() << "\n";
    };
  });

  // train
  std::string out_encoder;
  auto* tr = app.add_subcommand("train", "Fine-tune the query encoder");
  tr->add_option("--sessions", sessions, "Sessions JSONL")->required()->check(CLI::ExistingFile);
  tr->add_option("--qrels", qrels, "Training qrels")->required()->check(CLI::ExistingFile);
  tr->add_option("--collection", collection, "Passage TSV")->required()->check(CLI::ExistingFile);
  o.add<int>(tr, "--epochs", "training.epochs", "Training epochs");
  o.add<int>(tr, "--batch-size", "training.batch_size", "Batch size");
  o.add<double>(tr, "--lr", "training.learning_rate", "Learning rate");
  tr->add_option("--out-encoder", out_encoder, "Encoder checkpoint output")->required();
  tr->callback([&] {
    action = [&] {
      ConfigHandle cfg{make_config(g, o)};
      OwnedString report;
      check(convsdg_train(cfg.p, sessions.c_str(), qrels.c_str(), collection.c_str(),
                          out_encoder.c_str(), &report.p));
      std::cout << report.str() << "\n";
    };
  });

  // retrieve
  std::string queries, encoder, out_run;
  auto* ret = app.add_subcommand("retrieve", "Rank passages for every session turn");
  o.add<std::string>(ret, "--mode", "retrieval.mode", "bm25, dense-exact or dense-ann");
  o.add<int>(ret, "--k", "retrieval.k", "Results per query");
  ret->add_option("--queries", queries, "Sessions JSONL")->required()->check(CLI::ExistingFile);
  ret->add_option("--collection", collection, "Passage TSV")->required()->check(CLI::ExistingFile);
  ret->add_option("--encoder", encoder, "Query encoder checkpoint")->check(CLI::ExistingFile);
  ret->add_option("--out-run", out_run, "TREC run output")->required();
  ret->callback([&] {
    action = [&] {
      ConfigHandle cfg{make_config(g, o)};
      OwnedString report;
      check(convsdg_retrieve(cfg.p, queries.c_str(), collection.c_str(), opt(encoder),
                             out_run.c_str(), &report.p));
      std::cout << report.str() << "\n";
    };
  });

  // evaluate
  std::string run, compare, out_tsv;
  auto* ev = app.add_subcommand("evaluate", "Score a run against qrels");
  ev->add_option("--run", run, "TREC run")->required()->check(CLI::ExistingFile);
  ev->add_option("--qrels", qrels, "Qrels")->required()->check(CLI::ExistingFile);
  o.add<std::string>(ev, "--metrics", "evaluation.metrics", "e.g. mrr,ndcg@3,recall@100");
  o.add<int>(ev, "--rel-threshold", "evaluation.rel_threshold", "Minimum relevant grade");
  ev->add_option("--compare", compare, "Second run for a paired t-test")->check(CLI::ExistingFile);
  ev->add_option("--out-tsv", out_tsv, "Write the per-query TSV here instead of stdout");
  ev->callback([&] {
    action = [&] {
      ConfigHandle cfg{make_config(g, o)};
      OwnedString tsv, summary;
      check(convsdg_evaluate(cfg.p, run.c_str(), qrels.c_str(), opt(compare), &tsv.p,
                             &summary.p));
      if (out_tsv.empty()) {
        std::cout << tsv.str();
        std::cerr << summary.str() << "\n";
      } else {
        write_file(out_tsv, tsv.str());
        std::cout << summary.str() << "\n";
      }
    };
  });

  // pipeline
  auto* pipe = app.add_subcommand("pipeline", "Run a complete scenario in the workspace");
  o.add<std::string>(pipe, "--scenario", "scenario",
                     "dialogue_unsupervised or query_semisupervised");
  pipe->callback([&] {
    action = [&] {
      ConfigHandle cfg{make_config(g, o)};
      OwnedString manifest;
      check(convsdg_run_pipeline(cfg.p, g.resume ? 1 : 0, &manifest.p));
      std::cout << manifest.str() << "\n";
    };
  });

  // ablate-size
  std::vector<double> fractions;
  auto* asz = app.add_subcommand("ablate-size", "Retrain on fractions of the generated data");
  o.add<std::string>(asz, "--scenario", "scenario",
                     "dialogue_unsupervised or query_semisupervised");
  asz->add_option("--fractions", fractions, "Fractions in (0, 1]")->delimiter(',');
  asz->callback([&] {
    action = [&] {
      ConfigHandle cfg{make_config(g, o)};
      OwnedString csv;
      check(convsdg_ablate_size(cfg.p, fractions.empty() ? nullptr : fractions.data(),
                                fractions.size(), g.resume ? 1 : 0, &csv.p));
      std::cout << csv.str();
    };
  });

  // ablate-form
  auto* afm = app.add_subcommand("ablate-form", "Compare the four supervision query forms");
  afm->callback([&] {
    action = [&] {
      ConfigHandle cfg{make_config(g, o)};
      OwnedString csv;
      check(convsdg_ablate_form(cfg.p, g.resume ? 1 : 0, &csv.p));
      std::cout << csv.str();
    };
  });

  // make-fixture
  std::string fixture_dir;
  std::uint64_t fixture_seed = 2024;
  auto* fix = app.add_subcommand("make-fixture", "Write the synthetic desk corpus and config");
  fix->add_option("--out", fixture_dir, "Output directory")->required();
  fix->add_option("--fixture-seed", fixture_seed, "Corpus seed");
  fix->callback([&] {
    action = [&] {
      OwnedString path;
      check(convsdg_make_fixture(fixture_dir.c_str(), fixture_seed, &path.p));
      std::cout << path.str() << "\n";
    };
  });

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
    if (action) action();
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const Failure& f) {
    std::cerr << "error (" << convsdg_status_name(f.status) << "): " << f.message << "\n";
    return f.status == CONVSDG_ERR_INVALID_ARGUMENT ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
