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

#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "convsdg/convsdg.h"
#include "support.hpp"

namespace {

std::string take(char* s) {
  std::string out = s ? s : "";
  convsdg_string_free(s);
  return out;
}

}  // namespace

TEST_CASE("status names and errors") {
  CHECK(std::string(convsdg_version()).size() > 0);
  CHECK(std::string(convsdg_status_name(CONVSDG_OK)) == "ok");
  CHECK(std::string(convsdg_status_name(CONVSDG_ERR_STAGE_FAILED)) == "stage_failed");
  convsdg_config* cfg = nullptr;
  CHECK(convsdg_config_new(nullptr) == CONVSDG_ERR_INVALID_ARGUMENT);
  CHECK(std::string(convsdg_last_error()).size() > 0);
  CHECK(convsdg_config_load("/nonexistent/config.json", &cfg) != CONVSDG_OK);
  CHECK(cfg == nullptr);
  convsdg_string_free(nullptr);
  convsdg_config_free(nullptr);
}

TEST_CASE("config handles") {
  convsdg_config* cfg = nullptr;
  REQUIRE(convsdg_config_new(&cfg) == CONVSDG_OK);
  CHECK(convsdg_config_set(cfg, "training.epochs", "2") == CONVSDG_OK);
  CHECK(convsdg_config_set(cfg, "training.epochs", "x") == CONVSDG_ERR_INVALID_ARGUMENT);
  CHECK(convsdg_config_set(cfg, "no.such", "1") == CONVSDG_ERR_INVALID_ARGUMENT);
  char* json = nullptr;
  REQUIRE(convsdg_config_to_json(cfg, &json) == CONVSDG_OK);
  const auto parsed = nlohmann::json::parse(take(json));
  CHECK(parsed["training"]["epochs"] == 2);
  convsdg_config_free(cfg);
}

TEST_CASE("fixture, pipeline and evaluation through the C interface") {
  testing::TempDir dir;
  char* path = nullptr;
  REQUIRE(convsdg_make_fixture(dir.path().c_str(), 2024, &path) == CONVSDG_OK);
  const auto config_path = take(path);
  convsdg_config* cfg = nullptr;
  REQUIRE(convsdg_config_load(config_path.c_str(), &cfg) == CONVSDG_OK);
  const auto ws = (dir / "ws").string();
  REQUIRE(convsdg_config_set(cfg, "workspace", ws.c_str()) == CONVSDG_OK);

  char* manifest = nullptr;
  REQUIRE(convsdg_run_pipeline(cfg, 0, &manifest) == CONVSDG_OK);
  const auto m = nlohmann::json::parse(take(manifest));
  CHECK(m["stages_executed"] == 5);
  REQUIRE(convsdg_run_pipeline(cfg, 1, &manifest) == CONVSDG_OK);
  CHECK(nlohmann::json::parse(take(manifest))["stages_executed"] == 0);

  convsdg_run* run = nullptr;
  convsdg_qrels* qrels = nullptr;
  REQUIRE(convsdg_run_load((ws + "/run.txt").c_str(), &run) == CONVSDG_OK);
  REQUIRE(convsdg_qrels_load((dir / "eval_qrels.txt").c_str(), &qrels) == CONVSDG_OK);
  CHECK(convsdg_run_query_count(run) == convsdg_qrels_query_count(qrels));
  double mrr = -1;
  REQUIRE(convsdg_metric(run, qrels, "mrr", 1, &mrr) == CONVSDG_OK);
  CHECK(convsdg_metric(run, qrels, "map", 1, &mrr) == CONVSDG_ERR_INVALID_ARGUMENT);
  const auto report = nlohmann::json::parse(testing::read_file(dir / "ws" / "report.json"));
  CHECK(mrr == doctest::Approx(report["fine_tuned"]["mrr"].get<double>()));

  char* tsv = nullptr;
  char* summary = nullptr;
  REQUIRE(convsdg_evaluate(cfg, (ws + "/run.txt").c_str(), (dir / "eval_qrels.txt").c_str(),
                           nullptr, &tsv, &summary) == CONVSDG_OK);
  CHECK(take(tsv).rfind("query_id\t", 0) == 0);
  CHECK(nlohmann::json::parse(take(summary))["metrics"]["mrr"].get<double>() ==
        doctest::Approx(mrr));
  convsdg_run_free(run);
  convsdg_qrels_free(qrels);

  convsdg_sessions* sessions = nullptr;
  REQUIRE(convsdg_sessions_load((ws + "/sessions.jsonl").c_str(), &sessions) == CONVSDG_OK);
  CHECK(convsdg_sessions_count(sessions) > 0);
  CHECK(convsdg_sessions_turn_count(sessions) >= convsdg_sessions_count(sessions));
  convsdg_sessions_free(sessions);

  convsdg_config_set(cfg, "data.collection", (dir / "missing.tsv").c_str());
  CHECK(convsdg_run_pipeline(cfg, 0, &manifest) == CONVSDG_ERR_INVALID_ARGUMENT);
  convsdg_config_free(cfg);
}

TEST_CASE("numerics through the C interface") {
  const double q[] = {1, 0};
  const double p[] = {1, 0};
  const double negs[] = {0, 0};
  double loss = 0;
  double grad[2];
  REQUIRE(convsdg_contrastive_loss(q, p, negs, 1, 2, &loss, grad) == CONVSDG_OK);
  CHECK(loss == doctest::Approx(std::log1p(std::exp(-1.0))));
  CHECK(convsdg_contrastive_loss(q, p, negs, 0, 2, &loss, nullptr) ==
        CONVSDG_ERR_INVALID_ARGUMENT);
  const double a[] = {.9, .2, .6, .4, .8};
  const double b[] = {.5, .1, .6, .2, .7};
  double t = 0, pv = 0;
  REQUIRE(convsdg_paired_t_test(a, b, 5, &t, &pv) == CONVSDG_OK);
  CHECK(t == doctest::Approx(2.359071298478354));
  CHECK(pv == doctest::Approx(0.07774164094789979));
}

TEST_CASE("encoder, index and hits") {
  testing::TempDir dir;
  convsdg_encoder* enc = nullptr;
  REQUIRE(convsdg_encoder_new_hashed(CONVSDG_ROLE_PASSAGE, 8, 256, 32, 1, &enc) == CONVSDG_OK);
  CHECK(convsdg_encoder_dim(enc) == 8);
  std::vector<double> v(8);
  REQUIRE(convsdg_encoder_encode(enc, "hello world", v.data(), v.size()) == CONVSDG_OK);
  CHECK(convsdg_encoder_encode(enc, "hello", v.data(), 4) == CONVSDG_ERR_INVALID_ARGUMENT);
  REQUIRE(convsdg_encoder_save(enc, (dir / "e.bin").c_str()) == CONVSDG_OK);
  convsdg_encoder* back = nullptr;
  REQUIRE(convsdg_encoder_load((dir / "e.bin").c_str(), CONVSDG_ROLE_PASSAGE, 32, &back) ==
          CONVSDG_OK);
  std::vector<double> w(8);
  convsdg_encoder_encode(back, "hello world", w.data(), w.size());
  CHECK(v == w);

  testing::write_file(dir / "c.tsv", "a\talpha beta\nb\tgamma delta\n");
  convsdg_collection* coll = nullptr;
  REQUIRE(convsdg_collection_load((dir / "c.tsv").c_str(), &coll) == CONVSDG_OK);
  CHECK(convsdg_collection_size(coll) == 2);
  convsdg_index* built = nullptr;
  REQUIRE(convsdg_index_build(coll, enc, &built) == CONVSDG_OK);
  CHECK(convsdg_index_size(built) == 2);
  convsdg_index_free(built);
  convsdg_collection_free(coll);
  convsdg_encoder_free(back);
  convsdg_encoder_free(enc);

  const float matrix[] = {3, 4, 1, 0};
  const char* pids[] = {"d1", "d2"};
  convsdg_index* idx = nullptr;
  REQUIRE(convsdg_index_from_vectors(matrix, 2, 2, pids, &idx) == CONVSDG_OK);
  REQUIRE(convsdg_index_save(idx, (dir / "i.bin").c_str()) == CONVSDG_OK);
  convsdg_index_free(idx);
  REQUIRE(convsdg_index_load((dir / "i.bin").c_str(), &idx) == CONVSDG_OK);
  const float query[] = {1, 2};
  convsdg_hits* hits = nullptr;
  REQUIRE(convsdg_index_search(idx, query, 2, 5, CONVSDG_SEARCH_EXACT, &hits) == CONVSDG_OK);
  REQUIRE(convsdg_hits_count(hits) == 2);
  CHECK(std::string(convsdg_hits_pid(hits, 0)) == "d1");
  CHECK(convsdg_hits_score(hits, 0) == doctest::Approx(11.0));
  convsdg_hits_free(hits);
  CHECK(convsdg_index_search(idx, query, 3, 5, CONVSDG_SEARCH_EXACT, &hits) ==
        CONVSDG_ERR_INVALID_ARGUMENT);
  convsdg_index_free(idx);
}

TEST_CASE("mock backend through the C interface") {
  convsdg_config* cfg = nullptr;
  REQUIRE(convsdg_config_new(&cfg) == CONVSDG_OK);
  convsdg_backend* backend = nullptr;
  REQUIRE(convsdg_backend_new(cfg, &backend) == CONVSDG_OK);
  char* a = nullptr;
  char* b = nullptr;
  REQUIRE(convsdg_backend_complete(backend, "Rewrite: what is it", 0.7, 5, &a) == CONVSDG_OK);
  REQUIRE(convsdg_backend_complete(backend, "Rewrite: what is it", 0.7, 5, &b) == CONVSDG_OK);
  CHECK(take(a) == take(b));
  CHECK(convsdg_backend_complete(backend, "", 0.7, 5, &a) == CONVSDG_ERR_INVALID_ARGUMENT);
  convsdg_backend_free(backend);
  convsdg_config_set(cfg, "backend.kind", "http");
  CHECK(convsdg_backend_new(cfg, &backend) == CONVSDG_ERR_INVALID_ARGUMENT);
  convsdg_config_free(cfg);
}
