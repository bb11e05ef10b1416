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

#include "convsdg/convsdg.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <new>
#include <optional>
#include <string>
#include <vector>

#include "datamodel.hpp"
#include "dense_index.hpp"
#include "encoder.hpp"
#include "errors.hpp"
#include "evaluation.hpp"
#include "llm_gateway.hpp"
#include "pipeline.hpp"
#include "training.hpp"

struct convsdg_config {
  convsdg::pipeline::Json json;
};
struct convsdg_collection {
  convsdg::PassageCollection value;
};
struct convsdg_sessions {
  std::vector<convsdg::ConversationSession> value;
};
struct convsdg_qrels {
  convsdg::Qrels value;
};
struct convsdg_run {
  convsdg::RankedRun value;
};
struct convsdg_encoder {
  convsdg::retrieval::HashedProjectionEncoder value;
};
struct convsdg_index {
  convsdg::retrieval::DenseIndex value;
};
struct convsdg_hits {
  std::vector<convsdg::ScoredPassage> value;
};
struct convsdg_backend {
  std::unique_ptr<convsdg::llm::TextBackend> value;
};

namespace {

using namespace convsdg;
namespace fs = std::filesystem;

thread_local std::string g_last_error;

convsdg_status fail(convsdg_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

template <typename F>
convsdg_status guarded(F&& body) {
  g_last_error.clear();
  try {
    body();
    return CONVSDG_OK;
  } catch (const StageFailed& e) {
    return fail(CONVSDG_ERR_STAGE_FAILED, e.what());
  } catch (const InvalidArgument& e) {
    return fail(CONVSDG_ERR_INVALID_ARGUMENT, e.what());
  } catch (const IoError& e) {
    return fail(CONVSDG_ERR_IO, e.what());
  } catch (const FormatError& e) {
    return fail(CONVSDG_ERR_FORMAT, e.what());
  } catch (const ParseError& e) {
    return fail(CONVSDG_ERR_PARSE, e.what());
  } catch (const TransportError& e) {
    return fail(CONVSDG_ERR_TRANSPORT, e.what());
  } catch (const GenerationFailed& e) {
    return fail(CONVSDG_ERR_GENERATION_FAILED, e.what());
  } catch (const TrainingDiverged& e) {
    return fail(CONVSDG_ERR_TRAINING_DIVERGED, e.what());
  } catch (const std::bad_alloc&) {
    return fail(CONVSDG_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(CONVSDG_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(CONVSDG_ERR_INTERNAL, "unknown error");
  }
}

void need(const void* p, const char* name) {
  if (p == nullptr) throw InvalidArgument(std::string(name) + " must not be NULL");
}

fs::path path_arg(const char* p, const char* name) {
  need(p, name);
  if (*p == '\0') throw InvalidArgument(std::string(name) + " must not be empty");
  return fs::path(p);
}

char* dup(const std::string& s) {
  auto* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void give(char** out, const std::string& s) {
  if (out != nullptr) *out = dup(s);
}

pipeline::PipelineConfig typed(const convsdg_config* config) {
  need(config, "config");
  return pipeline::parse_config(config->json);
}

retrieval::EncoderRole role_of(convsdg_role role) {
  switch (role) {
    case CONVSDG_ROLE_QUERY: return retrieval::EncoderRole::query;
    case CONVSDG_ROLE_PASSAGE: return retrieval::EncoderRole::passage;
  }
  throw InvalidArgument("unknown encoder role");
}

}  // namespace

extern "C" {

const char* convsdg_version(void) { return "0.1.0"; }

const char* convsdg_status_name(convsdg_status status) {
  switch (status) {
    case CONVSDG_OK: return "ok";
    case CONVSDG_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case CONVSDG_ERR_IO: return "io_error";
    case CONVSDG_ERR_FORMAT: return "format_error";
    case CONVSDG_ERR_PARSE: return "parse_error";
    case CONVSDG_ERR_TRANSPORT: return "transport_error";
    case CONVSDG_ERR_GENERATION_FAILED: return "generation_failed";
    case CONVSDG_ERR_TRAINING_DIVERGED: return "training_diverged";
    case CONVSDG_ERR_STAGE_FAILED: return "stage_failed";
    case CONVSDG_ERR_INTERNAL: return "internal_error";
  }
  return "unknown";
}

const char* convsdg_last_error(void) { return g_last_error.c_str(); }

void convsdg_string_free(char* s) { std::free(s); }

// ------------------------------------------------------------------ config

convsdg_status convsdg_config_new(convsdg_config** out) {
  return guarded([&] {
    need(out, "out");
    *out = new convsdg_config{pipeline::default_config()};
  });
}

convsdg_status convsdg_config_load(const char* path, convsdg_config** out) {
  return guarded([&] {
    need(out, "out");
    *out = new convsdg_config{pipeline::load_config_file(path_arg(path, "path"))};
  });
}

convsdg_status convsdg_config_set(convsdg_config* config, const char* key, const char* value) {
  return guarded([&] {
    need(config, "config");
    need(key, "key");
    need(value, "value");
    auto copy = config->json;
    pipeline::set_config_value(copy, key, value);
    config->json = std::move(copy);
  });
}

convsdg_status convsdg_config_to_json(const convsdg_config* config, char** out) {
  return guarded([&] {
    need(config, "config");
    need(out, "out");
    *out = dup(config->json.dump(2));
  });
}

void convsdg_config_free(convsdg_config* config) { delete config; }

// ---------------------------------------------------------------- commands

convsdg_status convsdg_generate_dialogue(const convsdg_config* config, const char* topics,
                                         const char* out_sessions, char** report) {
  return guarded([&] {
    const auto r = pipeline::generate_dialogue(typed(config), path_arg(topics, "topics"),
                                               path_arg(out_sessions, "out_sessions"));
    give(report, r.dump());
  });
}

convsdg_status convsdg_augment_queries(const convsdg_config* config, const char* sessions,
                                       const char* qrels, const char* out_sessions,
                                       const char* out_qrels, char** report) {
  return guarded([&] {
    const auto r = pipeline::augment_queries(
        typed(config), path_arg(sessions, "sessions"), path_arg(qrels, "qrels"),
        path_arg(out_sessions, "out_sessions"), path_arg(out_qrels, "out_qrels"));
    give(report, r.dump());
  });
}

convsdg_status convsdg_build_supervision(const convsdg_config* config, const char* sessions,
                                         const char* collection, const char* out_qrels,
                                         char** report) {
  return guarded([&] {
    const auto r = pipeline::build_supervision(typed(config), path_arg(sessions, "sessions"),
                                               path_arg(collection, "collection"),
                                               path_arg(out_qrels, "out_qrels"));
    give(report, r.dump());
  });
}

convsdg_status convsdg_train(const convsdg_config* config, const char* sessions,
                             const char* qrels, const char* collection,
                             const char* out_encoder, char** report) {
  return guarded([&] {
    const auto r = pipeline::train_encoder(typed(config), path_arg(sessions, "sessions"),
                                           path_arg(qrels, "qrels"),
                                           path_arg(collection, "collection"),
                                           path_arg(out_encoder, "out_encoder"));
    give(report, r.dump());
  });
}

convsdg_status convsdg_retrieve(const convsdg_config* config, const char* queries,
                                const char* collection, const char* encoder,
                                const char* out_run, char** report) {
  return guarded([&] {
    const fs::path enc = encoder != nullptr ? fs::path(encoder) : fs::path();
    const auto r = pipeline::retrieve(typed(config), path_arg(queries, "queries"),
                                      path_arg(collection, "collection"), enc,
                                      path_arg(out_run, "out_run"));
    give(report, r.dump());
  });
}

convsdg_status convsdg_evaluate(const convsdg_config* config, const char* run,
                                const char* qrels, const char* compare, char** per_query_tsv,
                                char** summary) {
  return guarded([&] {
    const fs::path other = compare != nullptr ? fs::path(compare) : fs::path();
    const auto r = pipeline::evaluate(typed(config), path_arg(run, "run"),
                                      path_arg(qrels, "qrels"), other);
    std::unique_ptr<char, decltype(&std::free)> tsv(per_query_tsv ? dup(r.per_query_tsv) : nullptr,
                                                    std::free);
    give(summary, r.summary.dump());
    if (per_query_tsv != nullptr) *per_query_tsv = tsv.release();
  });
}

convsdg_status convsdg_run_pipeline(const convsdg_config* config, int resume, char** manifest) {
  return guarded([&] {
    const auto m = pipeline::run_pipeline(typed(config), resume != 0);
    give(manifest, m.dump(2));
  });
}

convsdg_status convsdg_ablate_size(const convsdg_config* config, const double* fractions,
                                   size_t n_fractions, int resume, char** csv) {
  return guarded([&] {
    std::vector<double> f = {0.25, 0.5, 0.75, 1.0};
    if (fractions != nullptr) f.assign(fractions, fractions + n_fractions);
    give(csv, pipeline::run_data_size_ablation(typed(config), f, resume != 0));
  });
}

convsdg_status convsdg_ablate_form(const convsdg_config* config, int resume, char** csv) {
  return guarded(
      [&] { give(csv, pipeline::run_query_form_ablation(typed(config), resume != 0)); });
}

convsdg_status convsdg_make_fixture(const char* dir, uint64_t seed, char** config_path) {
  return guarded([&] {
    const auto p = pipeline::make_fixture(path_arg(dir, "dir"), seed);
    give(config_path, p.string());
  });
}

// -------------------------------------------------------------- data files

convsdg_status convsdg_collection_load(const char* path, convsdg_collection** out) {
  return guarded([&] {
    need(out, "out");
    *out = new convsdg_collection{load_collection(path_arg(path, "path"))};
  });
}

size_t convsdg_collection_size(const convsdg_collection* c) { return c ? c->value.size() : 0; }
void convsdg_collection_free(convsdg_collection* c) { delete c; }

convsdg_status convsdg_sessions_load(const char* path, convsdg_sessions** out) {
  return guarded([&] {
    need(out, "out");
    *out = new convsdg_sessions{read_sessions(path_arg(path, "path"))};
  });
}

size_t convsdg_sessions_count(const convsdg_sessions* s) { return s ? s->value.size() : 0; }

size_t convsdg_sessions_turn_count(const convsdg_sessions* s) {
  if (s == nullptr) return 0;
  size_t n = 0;
  for (const auto& session : s->value) n += session.turns.size();
  return n;
}

void convsdg_sessions_free(convsdg_sessions* s) { delete s; }

convsdg_status convsdg_qrels_load(const char* path, convsdg_qrels** out) {
  return guarded([&] {
    need(out, "out");
    *out = new convsdg_qrels{read_qrels(path_arg(path, "path"))};
  });
}

size_t convsdg_qrels_query_count(const convsdg_qrels* q) { return q ? q->value.by_query.size() : 0; }
void convsdg_qrels_free(convsdg_qrels* q) { delete q; }

convsdg_status convsdg_run_load(const char* path, convsdg_run** out) {
  return guarded([&] {
    need(out, "out");
    *out = new convsdg_run{read_run(path_arg(path, "path"))};
  });
}

size_t convsdg_run_query_count(const convsdg_run* r) { return r ? r->value.by_query.size() : 0; }
void convsdg_run_free(convsdg_run* r) { delete r; }

convsdg_status convsdg_metric(const convsdg_run* run, const convsdg_qrels* qrels,
                              const char* metric, int rel_threshold, double* mean) {
  return guarded([&] {
    need(run, "run");
    need(qrels, "qrels");
    need(metric, "metric");
    need(mean, "mean");
    if (rel_threshold < 1) throw InvalidArgument("rel_threshold must be >= 1");
    const auto table = eval::evaluate_run(run->value, qrels->value, {eval::parse_metric(metric)},
                                          rel_threshold);
    *mean = table.means.at(0);
  });
}

// ---------------------------------------------------------------- numerics

convsdg_status convsdg_contrastive_loss(const double* query, const double* positive,
                                        const double* negatives, size_t n_neg, size_t dim,
                                        double* loss, double* grad) {
  return guarded([&] {
    need(query, "query");
    need(positive, "positive");
    need(loss, "loss");
    if (n_neg > 0) need(negatives, "negatives");
    std::vector<std::vector<double>> negs;
    for (size_t i = 0; i < n_neg; ++i) negs.emplace_back(negatives + i * dim, negatives + (i + 1) * dim);
    const auto r = train::contrastive_loss({query, dim}, {positive, dim}, negs);
    *loss = r.loss;
    if (grad != nullptr) std::copy(r.grad_query.begin(), r.grad_query.end(), grad);
  });
}

convsdg_status convsdg_paired_t_test(const double* a, const double* b, size_t n, double* t,
                                     double* p) {
  return guarded([&] {
    need(a, "a");
    need(b, "b");
    need(t, "t");
    need(p, "p");
    const auto r = eval::paired_t_test({a, n}, {b, n});
    *t = r.t;
    *p = r.p;
  });
}

// ------------------------------------------------------ encoders, indexes

convsdg_status convsdg_encoder_new_hashed(convsdg_role role, int dim, int hash_width,
                                          int max_len, uint64_t seed, convsdg_encoder** out) {
  return guarded([&] {
    need(out, "out");
    *out = new convsdg_encoder{retrieval::HashedProjectionEncoder::random_init(
        role_of(role), dim, hash_width, max_len, seed)};
  });
}

convsdg_status convsdg_encoder_load(const char* path, convsdg_role role, int max_len,
                                    convsdg_encoder** out) {
  return guarded([&] {
    need(out, "out");
    *out = new convsdg_encoder{
        retrieval::load_encoder(path_arg(path, "path"), role_of(role), max_len)};
  });
}

convsdg_status convsdg_encoder_save(const convsdg_encoder* encoder, const char* path) {
  return guarded([&] {
    need(encoder, "encoder");
    retrieval::save_encoder(encoder->value, path_arg(path, "path"));
  });
}

int convsdg_encoder_dim(const convsdg_encoder* encoder) {
  return encoder ? encoder->value.dim() : 0;
}

convsdg_status convsdg_encoder_encode(const convsdg_encoder* encoder, const char* text,
                                      double* out, size_t capacity) {
  return guarded([&] {
    need(encoder, "encoder");
    need(text, "text");
    need(out, "out");
    if (capacity < static_cast<size_t>(encoder->value.dim()))
      throw InvalidArgument("output buffer holds fewer than dim values");
    const auto v = encoder->value.encode(text);
    std::copy(v.begin(), v.end(), out);
  });
}

void convsdg_encoder_free(convsdg_encoder* encoder) { delete encoder; }

convsdg_status convsdg_index_build(const convsdg_collection* collection,
                                   const convsdg_encoder* passage_encoder, convsdg_index** out) {
  return guarded([&] {
    need(collection, "collection");
    need(passage_encoder, "passage_encoder");
    need(out, "out");
    *out = new convsdg_index{
        retrieval::DenseIndex::build(collection->value, passage_encoder->value)};
  });
}

convsdg_status convsdg_index_from_vectors(const float* matrix, size_t count, size_t dim,
                                          const char* const* pids, convsdg_index** out) {
  return guarded([&] {
    need(out, "out");
    if (count > 0) {
      need(matrix, "matrix");
      need(pids, "pids");
    }
    std::vector<std::string> ids;
    for (size_t i = 0; i < count; ++i) {
      need(pids[i], "pid");
      ids.emplace_back(pids[i]);
    }
    *out = new convsdg_index{retrieval::DenseIndex(
        static_cast<int>(dim), std::move(ids), std::vector<float>(matrix, matrix + count * dim))};
  });
}

convsdg_status convsdg_index_load(const char* path, convsdg_index** out) {
  return guarded([&] {
    need(out, "out");
    *out = new convsdg_index{retrieval::DenseIndex::load(path_arg(path, "path"))};
  });
}

convsdg_status convsdg_index_save(const convsdg_index* index, const char* path) {
  return guarded([&] {
    need(index, "index");
    index->value.save(path_arg(path, "path"));
  });
}

size_t convsdg_index_size(const convsdg_index* index) { return index ? index->value.size() : 0; }
void convsdg_index_free(convsdg_index* index) { delete index; }

convsdg_status convsdg_index_search(const convsdg_index* index, const float* query, size_t dim,
                                    int k, convsdg_search_mode mode, convsdg_hits** out) {
  return guarded([&] {
    need(index, "index");
    need(query, "query");
    need(out, "out");
    const auto m = mode == CONVSDG_SEARCH_ANN ? retrieval::SearchMode::ann
                                              : retrieval::SearchMode::exact;
    *out = new convsdg_hits{retrieval::dense_search({query, dim}, index->value, k, m)};
  });
}

size_t convsdg_hits_count(const convsdg_hits* hits) { return hits ? hits->value.size() : 0; }

const char* convsdg_hits_pid(const convsdg_hits* hits, size_t i) {
  if (hits == nullptr || i >= hits->value.size()) return nullptr;
  return hits->value[i].pid.c_str();
}

double convsdg_hits_score(const convsdg_hits* hits, size_t i) {
  if (hits == nullptr || i >= hits->value.size()) return 0.0;
  return hits->value[i].score;
}

void convsdg_hits_free(convsdg_hits* hits) { delete hits; }

// --------------------------------------------------------------- LLM access

convsdg_status convsdg_backend_new(const convsdg_config* config, convsdg_backend** out) {
  return guarded([&] {
    need(out, "out");
    *out = new convsdg_backend{llm::make_backend(typed(config).backend)};
  });
}

convsdg_status convsdg_backend_complete(convsdg_backend* backend, const char* prompt,
                                        double temperature, uint64_t seed, char** out) {
  return guarded([&] {
    need(backend, "backend");
    need(prompt, "prompt");
    need(out, "out");
    llm::GenerationParams params;
    params.temperature = temperature;
    params.seed = seed;
    *out = dup(llm::generate(prompt, params, *backend->value));
  });
}

void convsdg_backend_free(convsdg_backend* backend) { delete backend; }

}  // extern "C"
