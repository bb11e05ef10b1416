/*
 * Copyright 2026 The ConvSDG Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/*
 * C interface to libconvsdg: synthetic conversational training data,
 * dense retrieval fine-tuning and TREC-style evaluation.
 *
 * Every function returns a convsdg_status. On failure the message of the
 * calling thread is available from convsdg_last_error() until the next
 * call on that thread. Strings returned through char** are owned by the
 * caller and released with convsdg_string_free(). Handles are released with
 * their matching *_free function, which accepts NULL.
 */

#ifndef CONVSDG_CONVSDG_H
#define CONVSDG_CONVSDG_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define CONVSDG_API __declspec(dllexport)
#elif defined(CONVSDG_BUILDING)
#define CONVSDG_API __attribute__((visibility("default")))
#else
#define CONVSDG_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum convsdg_status {
  CONVSDG_OK = 0,
  CONVSDG_ERR_INVALID_ARGUMENT = 1,
  CONVSDG_ERR_IO = 2,
  CONVSDG_ERR_FORMAT = 3,
  CONVSDG_ERR_PARSE = 4,
  CONVSDG_ERR_TRANSPORT = 5,
  CONVSDG_ERR_GENERATION_FAILED = 6,
  CONVSDG_ERR_TRAINING_DIVERGED = 7,
  CONVSDG_ERR_STAGE_FAILED = 8,
  CONVSDG_ERR_INTERNAL = 99
} convsdg_status;

typedef enum convsdg_role { CONVSDG_ROLE_QUERY = 0, CONVSDG_ROLE_PASSAGE = 1 } convsdg_role;

typedef enum convsdg_search_mode {
  CONVSDG_SEARCH_EXACT = 0,
  CONVSDG_SEARCH_ANN = 1
} convsdg_search_mode;

CONVSDG_API const char* convsdg_version(void);
CONVSDG_API const char* convsdg_status_name(convsdg_status status);
CONVSDG_API const char* convsdg_last_error(void);
CONVSDG_API void convsdg_string_free(char* s);

/* ---------------------------------------------------------------- config */

typedef struct convsdg_config convsdg_config;

/* Built-in defaults. */
CONVSDG_API convsdg_status convsdg_config_new(convsdg_config** out);
/* Defaults overlaid with a JSON file; relative data paths resolve against
 * the file's directory. */
CONVSDG_API convsdg_status convsdg_config_load(const char* path, convsdg_config** out);
/* Dotted key such as "training.epochs"; value is parsed as JSON for
 * non-string keys. */
CONVSDG_API convsdg_status convsdg_config_set(convsdg_config* config, const char* key,
                                              const char* value);
CONVSDG_API convsdg_status convsdg_config_to_json(const convsdg_config* config, char** out);
CONVSDG_API void convsdg_config_free(convsdg_config* config);

/* -------------------------------------------------------------- commands */
/* Each command writes its output files and, when report is not NULL,
 * returns a JSON report. */

CONVSDG_API convsdg_status convsdg_generate_dialogue(const convsdg_config* config,
                                                     const char* topics,
                                                     const char* out_sessions, char** report);
CONVSDG_API convsdg_status convsdg_augment_queries(const convsdg_config* config,
                                                   const char* sessions, const char* qrels,
                                                   const char* out_sessions,
                                                   const char* out_qrels, char** report);
CONVSDG_API convsdg_status convsdg_build_supervision(const convsdg_config* config,
                                                     const char* sessions,
                                                     const char* collection,
                                                     const char* out_qrels, char** report);
CONVSDG_API convsdg_status convsdg_train(const convsdg_config* config, const char* sessions,
                                         const char* qrels, const char* collection,
                                         const char* out_encoder, char** report);
/* encoder may be NULL for the untrained query encoder. */
CONVSDG_API convsdg_status convsdg_retrieve(const convsdg_config* config, const char* queries,
                                            const char* collection, const char* encoder,
                                            const char* out_run, char** report);
/* compare may be NULL. Either output pointer may be NULL. */
CONVSDG_API convsdg_status convsdg_evaluate(const convsdg_config* config, const char* run,
                                            const char* qrels, const char* compare,
                                            char** per_query_tsv, char** summary);
CONVSDG_API convsdg_status convsdg_run_pipeline(const convsdg_config* config, int resume,
                                                char** manifest);
/* fractions may be NULL for 0.25, 0.50, 0.75, 1.00. */
CONVSDG_API convsdg_status convsdg_ablate_size(const convsdg_config* config,
                                               const double* fractions, size_t n_fractions,
                                               int resume, char** csv);
CONVSDG_API convsdg_status convsdg_ablate_form(const convsdg_config* config, int resume,
                                               char** csv);
/* Writes the synthetic desk corpus and a matching config.json into dir. */
CONVSDG_API convsdg_status convsdg_make_fixture(const char* dir, uint64_t seed,
                                                char** config_path);

/* ------------------------------------------------------------ data files */

typedef struct convsdg_collection convsdg_collection;
CONVSDG_API convsdg_status convsdg_collection_load(const char* path, convsdg_collection** out);
CONVSDG_API size_t convsdg_collection_size(const convsdg_collection* collection);
CONVSDG_API void convsdg_collection_free(convsdg_collection* collection);

typedef struct convsdg_sessions convsdg_sessions;
CONVSDG_API convsdg_status convsdg_sessions_load(const char* path, convsdg_sessions** out);
CONVSDG_API size_t convsdg_sessions_count(const convsdg_sessions* sessions);
CONVSDG_API size_t convsdg_sessions_turn_count(const convsdg_sessions* sessions);
CONVSDG_API void convsdg_sessions_free(convsdg_sessions* sessions);

typedef struct convsdg_qrels convsdg_qrels;
CONVSDG_API convsdg_status convsdg_qrels_load(const char* path, convsdg_qrels** out);
CONVSDG_API size_t convsdg_qrels_query_count(const convsdg_qrels* qrels);
CONVSDG_API void convsdg_qrels_free(convsdg_qrels* qrels);

typedef struct convsdg_run convsdg_run;
CONVSDG_API convsdg_status convsdg_run_load(const char* path, convsdg_run** out);
CONVSDG_API size_t convsdg_run_query_count(const convsdg_run* run);
CONVSDG_API void convsdg_run_free(convsdg_run* run);

/* Macro-averaged "mrr", "ndcg@k" or "recall@k" over the judged queries. */
CONVSDG_API convsdg_status convsdg_metric(const convsdg_run* run, const convsdg_qrels* qrels,
                                          const char* metric, int rel_threshold,
                                          double* mean);

/* ------------------------------------------------------------- numerics */

/* Contrastive loss of one query against a positive and n_neg negatives
 * stored row-major. grad (dim values) may be NULL. */
CONVSDG_API convsdg_status convsdg_contrastive_loss(const double* query, const double* positive,
                                                    const double* negatives, size_t n_neg,
                                                    size_t dim, double* loss, double* grad);
CONVSDG_API convsdg_status convsdg_paired_t_test(const double* a, const double* b, size_t n,
                                                 double* t, double* p);

/* ----------------------------------------------------- encoders, indexes */

typedef struct convsdg_encoder convsdg_encoder;
CONVSDG_API convsdg_status convsdg_encoder_new_hashed(convsdg_role role, int dim,
                                                      int hash_width, int max_len,
                                                      uint64_t seed, convsdg_encoder** out);
CONVSDG_API convsdg_status convsdg_encoder_load(const char* path, convsdg_role role,
                                                int max_len, convsdg_encoder** out);
CONVSDG_API convsdg_status convsdg_encoder_save(const convsdg_encoder* encoder,
                                                const char* path);
CONVSDG_API int convsdg_encoder_dim(const convsdg_encoder* encoder);
/* Writes dim values into out, which must hold capacity >= dim values. */
CONVSDG_API convsdg_status convsdg_encoder_encode(const convsdg_encoder* encoder,
                                                  const char* text, double* out,
                                                  size_t capacity);
CONVSDG_API void convsdg_encoder_free(convsdg_encoder* encoder);

typedef struct convsdg_index convsdg_index;
CONVSDG_API convsdg_status convsdg_index_build(const convsdg_collection* collection,
                                               const convsdg_encoder* passage_encoder,
                                               convsdg_index** out);
/* Row-major count x dim matrix; pids has count entries. */
CONVSDG_API convsdg_status convsdg_index_from_vectors(const float* matrix, size_t count,
                                                      size_t dim, const char* const* pids,
                                                      convsdg_index** out);
CONVSDG_API convsdg_status convsdg_index_load(const char* path, convsdg_index** out);
CONVSDG_API convsdg_status convsdg_index_save(const convsdg_index* index, const char* path);
CONVSDG_API size_t convsdg_index_size(const convsdg_index* index);
CONVSDG_API void convsdg_index_free(convsdg_index* index);

typedef struct convsdg_hits convsdg_hits;
CONVSDG_API convsdg_status convsdg_index_search(const convsdg_index* index, const float* query,
                                                size_t dim, int k, convsdg_search_mode mode,
                                                convsdg_hits** out);
CONVSDG_API size_t convsdg_hits_count(const convsdg_hits* hits);
/* NULL when i is out of range. */
CONVSDG_API const char* convsdg_hits_pid(const convsdg_hits* hits, size_t i);
CONVSDG_API double convsdg_hits_score(const convsdg_hits* hits, size_t i);
CONVSDG_API void convsdg_hits_free(convsdg_hits* hits);

/* ------------------------------------------------------------ LLM access */

typedef struct convsdg_backend convsdg_backend;
/* Backend described by the config's "backend" section. */
CONVSDG_API convsdg_status convsdg_backend_new(const convsdg_config* config,
                                               convsdg_backend** out);
CONVSDG_API convsdg_status convsdg_backend_complete(convsdg_backend* backend,
                                                    const char* prompt, double temperature,
                                                    uint64_t seed, char** out);
CONVSDG_API void convsdg_backend_free(convsdg_backend* backend);

#ifdef __cplusplus
}
#endif

#endif /* CONVSDG_CONVSDG_H */
