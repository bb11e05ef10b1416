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

#include <cstdlib>

#include "errors.hpp"
#include "pipeline.hpp"
#include "support.hpp"
#include "text.hpp"

using namespace convsdg;
using namespace convsdg::pipeline;

namespace {

PipelineConfig fixture_config(const testing::TempDir& dir, const std::string& ws = "ws") {
  auto json = load_config_file(make_fixture(dir.path(), 2024));
  set_config_value(json, "workspace", (dir / ws).string());
  return parse_config(json);
}

std::vector<std::string> csv_rows(const std::string& csv) {
  std::vector<std::string> rows;
  for (const auto& line : split(csv, '\n'))
    if (!line.empty()) rows.push_back(line);
  return rows;
}

std::vector<double> csv_values(const std::string& row) {
  const auto cells = split(row, ',');
  std::vector<double> out;
  for (std::size_t i = 2; i < cells.size(); ++i) out.push_back(std::stod(cells[i]));
  return out;
}

}  // namespace

TEST_CASE("default config parses") {
  const auto cfg = parse_config(default_config());
  CHECK(cfg.scenario == Scenario::dialogue_unsupervised);
  CHECK(cfg.turns == 8);
  CHECK(cfg.rewrites == 2);
  CHECK(cfg.supervision.top_k == 5);
  CHECK(cfg.supervision.m == 3);
  CHECK(cfg.training.batch_size == 16);
  CHECK(cfg.training.epochs == 5);
  CHECK(cfg.training.learning_rate == doctest::Approx(1e-5));
  CHECK(cfg.retrieval_k == 100);
  CHECK(cfg.metrics == "mrr,ndcg@3,recall@100");
}

TEST_CASE("config overrides and validation") {
  auto json = default_config();
  set_config_value(json, "training.epochs", "3");
  set_config_value(json, "dataset", "42");
  set_config_value(json, "supervision.form", "cqt");
  const auto cfg = parse_config(json);
  CHECK(cfg.training.epochs == 3);
  CHECK(cfg.dataset == "42");
  CHECK(cfg.supervision.form == prf::QueryForm::convq_plus_topic);

  auto bad = default_config();
  bad["training"]["epochs"] = "many";
  CHECK_THROWS_AS(parse_config(bad), InvalidArgument);
  bad = default_config();
  bad["scenario"] = "other";
  CHECK_THROWS_AS(parse_config(bad), InvalidArgument);
  CHECK_THROWS_AS(set_config_value(json, "training.nonexistent", "1"), InvalidArgument);
}

TEST_CASE("config files reject unknown keys and resolve paths") {
  testing::TempDir dir;
  testing::write_file(dir / "bad.json", R"({"trainig": {"epochs": 2}})");
  CHECK_THROWS_AS(load_config_file(dir / "bad.json"), InvalidArgument);
  testing::write_file(dir / "ok.json",
                      R"({"workspace": "out", "data": {"collection": "c.tsv"}})");
  const auto cfg = parse_config(load_config_file(dir / "ok.json"));
  CHECK(cfg.workspace == dir / "out");
  CHECK(cfg.data.collection == dir / "c.tsv");
  CHECK_THROWS(load_config_file(dir / "missing.json"));
}

TEST_CASE("environment interpolation") {
  auto json = default_config();
  ::setenv("CONVSDG_TEST_MODEL", "tiny-model", 1);
  json["backend"]["model"] = "${CONVSDG_TEST_MODEL}";
  CHECK(parse_config(json).backend.model_name == "tiny-model");
  ::unsetenv("CONVSDG_TEST_UNSET_VAR");
  json["backend"]["model"] = "${CONVSDG_TEST_UNSET_VAR}";
  CHECK_THROWS_AS(parse_config(json), InvalidArgument);
}

TEST_CASE("stage seeds differ") {
  const auto cfg = parse_config(default_config());
  CHECK(generation_seed(cfg) != supervision_seed(cfg));
  CHECK(augmentation_seed(cfg) != training_seed(cfg));
}

TEST_CASE("dialogue pipeline writes a manifest and resumes") {
  testing::TempDir dir;
  const auto cfg = fixture_config(dir);
  const auto manifest = run_pipeline(cfg, false);
  CHECK(manifest["scenario"] == "dialogue_unsupervised");
  CHECK(manifest["stages_executed"] == 5);
  REQUIRE(manifest["artifacts"].size() == 5);
  for (const auto& a : manifest["artifacts"]) {
    const auto path = cfg.workspace / a["path"].get<std::string>();
    CHECK(std::filesystem::exists(path));
    CHECK(a["sha256"] == sha256_file(path));
    CHECK(a["sha256"].get<std::string>().size() == 64);
  }
  CHECK(std::filesystem::exists(cfg.workspace / "manifest.json"));
  const auto report = Json::parse(testing::read_file(cfg.workspace / "report.json"));
  const double tuned = report["fine_tuned"]["mrr"].get<double>();
  const double zero = report["zero_shot"]["mrr"].get<double>();
  CHECK(tuned > zero);
  CHECK(report["relative_improvement"]["mrr"].get<double>() ==
        doctest::Approx((tuned - zero) / zero));
  CHECK(report["t_test"].contains("mrr"));

  const auto again = run_pipeline(cfg, true);
  CHECK(again["stages_executed"] == 0);
  CHECK(again["artifacts"] == manifest["artifacts"]);
}

TEST_CASE("pipeline runs are reproducible") {
  testing::TempDir dir;
  const auto a = fixture_config(dir, "a");
  const auto b = fixture_config(dir, "b");
  run_pipeline(a, false);
  run_pipeline(b, false);
  for (const auto* name : {"sessions.jsonl", "pseudo_qrels.txt", "query_encoder.bin", "run.txt",
                           "report.json"})
    CHECK(sha256_file(a.workspace / name) == sha256_file(b.workspace / name));
}

TEST_CASE("semi-supervised pipeline") {
  testing::TempDir dir;
  auto cfg = fixture_config(dir);
  cfg.scenario = Scenario::query_semisupervised;
  const auto manifest = run_pipeline(cfg, false);
  CHECK(manifest["scenario"] == "query_semisupervised");
  CHECK(std::filesystem::exists(cfg.workspace / "merged_qrels.txt"));
  CHECK(std::filesystem::exists(cfg.workspace / "augmented_sessions.jsonl"));
  const auto report = Json::parse(testing::read_file(cfg.workspace / "report.json"));
  CHECK(report["fine_tuned"]["mrr"].get<double>() > report["zero_shot"]["mrr"].get<double>());
}

TEST_CASE("missing inputs fail before any stage runs") {
  testing::TempDir dir;
  auto cfg = fixture_config(dir);
  cfg.data.collection.clear();
  CHECK_THROWS_AS(run_pipeline(cfg, false), InvalidArgument);
  CHECK_FALSE(std::filesystem::exists(cfg.workspace / "sessions.jsonl"));
  cfg = fixture_config(dir);
  cfg.data.eval_qrels = dir / "nope.txt";
  CHECK_THROWS_AS(run_pipeline(cfg, false), InvalidArgument);
}

TEST_CASE("stage errors name the stage") {
  testing::TempDir dir;
  auto cfg = fixture_config(dir);
  cfg.training.learning_rate = 1e300;
  try {
    run_pipeline(cfg, false);
    FAIL("expected a stage failure");
  } catch (const StageFailed& e) {
    CHECK(e.stage() == "train");
    CHECK(std::string(e.what()).find("inputs:") != std::string::npos);
  }
}

TEST_CASE("size ablation") {
  testing::TempDir dir;
  const auto cfg = fixture_config(dir);
  const auto csv = run_data_size_ablation(cfg);
  const auto rows = csv_rows(csv);
  REQUIRE(rows.size() == 5);
  CHECK(rows[0] == "dataset,fraction,mrr,ndcg@3,recall@100");
  CHECK(rows[1].rfind("desk,0.25,", 0) == 0);
  CHECK(rows[4].rfind("desk,1.00,", 0) == 0);
  CHECK(testing::read_file(cfg.workspace / "ablation_size.csv") == csv);

  run_pipeline(cfg, true);
  const auto report = Json::parse(testing::read_file(cfg.workspace / "report.json"));
  const auto full = csv_values(rows[4]);
  CHECK(full[0] == doctest::Approx(report["fine_tuned"]["mrr"].get<double>()).epsilon(1e-8));
  CHECK(full[1] == doctest::Approx(report["fine_tuned"]["ndcg@3"].get<double>()).epsilon(1e-8));

  CHECK(run_data_size_ablation(cfg) == csv);
  CHECK_THROWS_AS(run_data_size_ablation(cfg, {0.0, 0.5}), InvalidArgument);
  CHECK_THROWS_AS(run_data_size_ablation(cfg, {1.5}), InvalidArgument);
  CHECK(csv_rows(run_data_size_ablation(cfg, {1.0, 0.5, 0.5})).size() == 3);
}

TEST_CASE("query form ablation") {
  testing::TempDir dir;
  const auto cfg = fixture_config(dir);
  const auto csv = run_query_form_ablation(cfg);
  const auto rows = csv_rows(csv);
  REQUIRE(rows.size() == 5);
  CHECK(rows[0] == "dataset,form,mrr,ndcg@3,recall@100");
  CHECK(rows[1].rfind("desk,qa,", 0) == 0);
  CHECK(rows[2].rfind("desk,qat,", 0) == 0);
  CHECK(rows[3].rfind("desk,cqt,", 0) == 0);
  CHECK(rows[4].rfind("desk,cqat,", 0) == 0);
  CHECK(run_query_form_ablation(cfg) == csv);

  // The qat row is the default supervision form, so it matches a full run.
  run_pipeline(cfg, true);
  const auto report = Json::parse(testing::read_file(cfg.workspace / "report.json"));
  const auto qat = csv_values(rows[2]);
  CHECK(qat[0] == doctest::Approx(report["fine_tuned"]["mrr"].get<double>()).epsilon(1e-8));
}

TEST_CASE("evaluate command output") {
  testing::TempDir dir;
  const auto cfg = fixture_config(dir);
  run_pipeline(cfg, false);
  const auto out = evaluate(cfg, cfg.workspace / "run.txt", cfg.data.eval_qrels);
  const auto rows = csv_rows(out.per_query_tsv);
  REQUIRE(rows.size() >= 2);
  CHECK(rows[0] == "query_id\tmrr\tndcg@3\trecall@100");
  CHECK(rows.back().rfind("all\t", 0) == 0);
  const auto report = Json::parse(testing::read_file(cfg.workspace / "report.json"));
  CHECK(out.summary["metrics"]["mrr"].get<double>() ==
        doctest::Approx(report["fine_tuned"]["mrr"].get<double>()));
  const auto cmp = evaluate(cfg, cfg.workspace / "run.txt", cfg.data.eval_qrels,
                            cfg.workspace / "run.txt");
  CHECK(cmp.summary["compare"]["t_test"]["mrr"]["p"].get<double>() == 1.0);
}
