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
#include <fstream>
#include <json.hpp>

#include "errors.hpp"
#include "evaluation.hpp"
#include "support.hpp"

using namespace convsdg;
using namespace convsdg::eval;
using Json = nlohmann::json;

namespace {

Json load_json(const std::string& name) {
  std::ifstream in(testing::data_dir() / name);
  REQUIRE(in.good());
  return Json::parse(in);
}

const std::vector<MetricSpec> kDefaultMetrics = parse_metrics("mrr,ndcg@3,recall@100");

}  // namespace

TEST_CASE("reciprocal rank") {
  const std::vector<std::string> ranked{"a", "b", "c"};
  CHECK(reciprocal_rank(ranked, {{"b", 1}}) == doctest::Approx(0.5));
  CHECK(reciprocal_rank(ranked, {{"a", 2}, {"c", 1}}) == doctest::Approx(1.0));
  CHECK(reciprocal_rank(ranked, {{"z", 1}}) == 0.0);
  CHECK(reciprocal_rank(ranked, {{"a", 1}, {"c", 2}}, 2) == doctest::Approx(1.0 / 3));
  CHECK(reciprocal_rank(ranked, {{"a", 0}}) == 0.0);
}

TEST_CASE("ndcg at 3") {
  const std::vector<std::string> ranked{"d1", "d2", "d3"};
  // DCG 2 + 1/2, ideal 2 + 1/log2(3)
  CHECK(ndcg_at_k(ranked, {{"d1", 2}, {"d2", 0}, {"d3", 1}}, 3) ==
        doctest::Approx(0.950230).epsilon(1e-5));
  CHECK(ndcg_at_k(ranked, {{"d1", 0}}, 3) == 0.0);
  CHECK(ndcg_at_k(ranked, {}, 3) == 0.0);
  CHECK(ndcg_at_k(ranked, {{"d1", 1}, {"d2", 1}}, 3) == doctest::Approx(1.0));
}

TEST_CASE("recall at k") {
  const std::vector<std::string> ranked{"a", "b", "c", "d"};
  const QueryJudgments judged{{"a", 1}, {"d", 1}, {"x", 1}, {"y", 0}};
  CHECK(recall_at_k(ranked, judged, 100) == doctest::Approx(2.0 / 3));
  CHECK(recall_at_k(ranked, judged, 2) == doctest::Approx(1.0 / 3));
  CHECK(recall_at_k(ranked, {{"y", 0}}, 100) == 0.0);
}

TEST_CASE("macro average over judged queries") {
  RankedRun run;
  run.set_ranking("q1", {{"a", 2.0}, {"b", 1.0}});
  run.set_ranking("q2", {{"c", 1.0}});
  run.set_ranking("extra", {{"a", 1.0}});
  Qrels qrels;
  qrels.add("q1", "b", 1);
  qrels.add("q2", "c", 1);
  qrels.add("q3", "c", 1);
  const auto table = evaluate_run(run, qrels, parse_metrics("mrr"));
  CHECK(table.per_query.size() == 3);
  CHECK(table.per_query.count("extra") == 0);
  CHECK(table.per_query.at("q3")[0] == 0.0);
  CHECK(table.means[0] == doctest::Approx((0.5 + 1.0 + 0.0) / 3));
  CHECK(table.column(0).size() == 3);
}

TEST_CASE("metrics agree with the reference implementation") {
  const auto cases = load_json("metric_oracle.json");
  REQUIRE(cases.size() >= 50);
  for (const auto& c : cases) {
    for (const auto& [qid, expected] : c["expected"].items()) {
      const auto ranked = c["run"][qid].get<std::vector<std::string>>();
      QueryJudgments judged;
      for (const auto& [pid, grade] : c["qrels"][qid].items()) judged[pid] = grade.get<int>();
      CHECK(std::abs(reciprocal_rank(ranked, judged) - expected["mrr"].get<double>()) <= 1e-6);
      CHECK(std::abs(ndcg_at_k(ranked, judged, 3) - expected["ndcg@3"].get<double>()) <= 1e-6);
      CHECK(std::abs(recall_at_k(ranked, judged, 100) - expected["recall@100"].get<double>()) <=
            1e-6);
    }
  }
}

TEST_CASE("evaluate_run agrees with the reference implementation") {
  const auto cases = load_json("metric_oracle.json");
  for (const auto& c : cases) {
    RankedRun run;
    for (const auto& [qid, pids] : c["run"].items()) {
      std::vector<ScoredPassage> hits;
      const auto n = pids.size();
      for (std::size_t i = 0; i < n; ++i)
        hits.push_back({pids[i].get<std::string>(), static_cast<double>(n - i)});
      run.set_ranking(qid, hits);
    }
    Qrels qrels;
    for (const auto& [qid, judged] : c["qrels"].items())
      for (const auto& [pid, grade] : judged.items()) qrels.add(qid, pid, grade.get<int>());
    const auto table = evaluate_run(run, qrels, kDefaultMetrics);
    for (const auto& [qid, expected] : c["expected"].items()) {
      const auto& row = table.per_query.at(qid);
      CHECK(std::abs(row[0] - expected["mrr"].get<double>()) <= 1e-6);
      CHECK(std::abs(row[1] - expected["ndcg@3"].get<double>()) <= 1e-6);
      CHECK(std::abs(row[2] - expected["recall@100"].get<double>()) <= 1e-6);
    }
  }
}

TEST_CASE("paired t-test agrees with the reference implementation") {
  const auto cases = load_json("ttest_oracle.json");
  REQUIRE(!cases.empty());
  const auto& first = cases[0];
  const auto a0 = first["a"].get<std::vector<double>>();
  const auto b0 = first["b"].get<std::vector<double>>();
  const auto r0 = paired_t_test(a0, b0);
  CHECK(r0.t == doctest::Approx(2.359071298478354).epsilon(1e-9));
  CHECK(r0.p == doctest::Approx(0.07774164094789979).epsilon(1e-9));
  for (const auto& c : cases) {
    const auto a = c["a"].get<std::vector<double>>();
    const auto b = c["b"].get<std::vector<double>>();
    const auto r = paired_t_test(a, b);
    CHECK(std::abs(r.t - c["t"].get<double>()) <= 1e-6 * std::max(1.0, std::abs(r.t)));
    CHECK(std::abs(r.p - c["p"].get<double>()) <= 1e-6);
  }
}

TEST_CASE("degenerate t-tests") {
  const std::vector<double> a{0.3, 0.5, 0.7};
  const auto same = paired_t_test(a, a);
  CHECK(same.p == 1.0);
  const std::vector<double> b{0.2, 0.4, 0.6};
  CHECK(paired_t_test(a, b).p == 0.0);
  CHECK_THROWS_AS(paired_t_test(a, std::vector<double>{1.0}), InvalidArgument);
  CHECK_THROWS_AS(paired_t_test(std::vector<double>{1.0}, std::vector<double>{2.0}),
                  InvalidArgument);
}

TEST_CASE("metric names") {
  CHECK(parse_metric("mrr").kind == MetricSpec::Kind::mrr);
  const auto n = parse_metric("ndcg@10");
  CHECK(n.kind == MetricSpec::Kind::ndcg);
  CHECK(n.k == 10);
  CHECK(parse_metric("recall@100").name == "recall@100");
  CHECK(kDefaultMetrics.size() == 3);
  CHECK_THROWS_AS(parse_metric("map"), InvalidArgument);
  CHECK_THROWS_AS(parse_metric("ndcg@0"), InvalidArgument);
  CHECK_THROWS_AS(parse_metric("recall@x"), InvalidArgument);
}
