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

#include "errors.hpp"
#include "llm_gateway.hpp"
#include "query_aug.hpp"

using namespace convsdg;

namespace {

struct Echo : llm::TextBackend {
  std::string complete(const std::string& prompt, const llm::GenerationParams&) override {
    const auto pos = prompt.find("Input query: ");
    auto q = prompt.substr(pos + 13);
    while (!q.empty() && q.back() == '\n') q.pop_back();
    return q;
  }
};

ConversationSession session(const std::string& id, int turns) {
  ConversationSession s;
  s.session_id = id;
  s.topic = {"t", "whales", "whale biology"};
  for (int i = 1; i <= turns; ++i)
    s.turns.push_back({default_turn_id(id, i), i, "question number " + std::to_string(i),
                       std::nullopt, {}});
  return s;
}

}  // namespace

TEST_CASE("two mock rewrites are non-empty and reproducible") {
  llm::MockBackend mock;
  llm::GenerationParams p;
  p.seed = 8;
  const auto a = aug::rewrite_turn("what are whales", 2, mock, p);
  REQUIRE(a.rewrites.size() == 2);
  for (const auto& r : a.rewrites) CHECK_FALSE(r.empty());
  CHECK(aug::rewrite_turn("what are whales", 2, mock, p).rewrites == a.rewrites);
}

TEST_CASE("echoing backend produces a degenerate rewrite") {
  Echo echo;
  const auto r = aug::rewrite_turn("what are whales", 1, echo, {});
  CHECK(r.rewrites == std::vector<std::string>{"what are whales"});
  CHECK(r.degenerate == 1);
}

TEST_CASE("zero rewrites is rejected") {
  llm::MockBackend mock;
  CHECK_THROWS_AS(aug::rewrite_turn("q", 0, mock, {}), InvalidArgument);
  aug::AugmentationConfig cfg;
  cfg.t = 0;
  CHECK_THROWS_AS(aug::augment_dataset({}, cfg, mock), InvalidArgument);
}

TEST_CASE("grades propagate to every augmented turn") {
  llm::MockBackend mock;
  aug::Dataset d;
  d.sessions = {session("Q", 1)};
  d.qrels.add("Q_1", "d5", 2);
  aug::AugmentationConfig cfg;
  cfg.t = 3;
  const auto out = aug::augment_dataset(d, cfg, mock);
  REQUIRE(out.augmented.sessions.size() == 3);
  for (int i = 1; i <= 3; ++i) {
    const auto id = aug::augmented_id("Q_1", i);
    REQUIRE(out.augmented.qrels.find(id) != nullptr);
    CHECK(*out.augmented.qrels.find(id) == QueryJudgments{{"d5", 2}});
  }
  CHECK(out.report.augmented_turns == 3);
}

TEST_CASE("only annotated turns are augmented") {
  llm::MockBackend mock;
  aug::Dataset d;
  d.sessions = {session("S", 2)};
  d.qrels.add("S_1", "d1", 1);
  aug::AugmentationConfig cfg;
  const auto out = aug::augment_dataset(d, cfg, mock);
  CHECK(out.augmented.sessions.size() == 2);
  CHECK(out.report.skipped_turns == 1);
  CHECK(out.report.annotated_turns == 1);
  for (const auto& s : out.augmented.sessions) {
    CHECK(s.turns.size() == 1);
    CHECK(s.provenance == Provenance::query_augmented);
  }
}

TEST_CASE("augmented sample keeps the preceding context") {
  llm::MockBackend mock;
  aug::Dataset d;
  d.sessions = {session("S", 3)};
  d.qrels.add("S_3", "d1", 1);
  const auto out = aug::augment_dataset(d, {}, mock);
  REQUIRE(out.augmented.sessions.size() == 2);
  const auto& s = out.augmented.sessions[0];
  REQUIRE(s.turns.size() == 3);
  CHECK(s.turns[0].query == "question number 1");
  CHECK(s.turns[1].query == "question number 2");
  CHECK(s.turns[2].turn_id == s.session_id);
  CHECK(s.turns[2].query != "question number 3");
  CHECK(out.augmented.qrels.find(s.turns[0].turn_id) == nullptr);
}

TEST_CASE("pseudo judgments are not accepted for augmentation") {
  llm::MockBackend mock;
  aug::Dataset d;
  d.sessions = {session("S", 1)};
  d.qrels.source = QrelsSource::pseudo;
  d.qrels.add("S_1", "d1", 1);
  CHECK_THROWS_AS(aug::augment_dataset(d, {}, mock), InvalidArgument);
}

TEST_CASE("merge with an empty augmented set is the identity") {
  aug::Dataset d;
  d.sessions = {session("A", 2), session("B", 1)};
  d.qrels.add("A_1", "d1", 1);
  const auto merged = aug::merge_datasets(d, {});
  CHECK(merged.sessions == d.sessions);
  CHECK(merged.qrels == d.qrels);
}

TEST_CASE("merge rejects colliding ids") {
  aug::Dataset a, b;
  a.sessions = {session("A", 1)};
  b.sessions = {session("A", 1)};
  CHECK_THROWS_AS(aug::merge_datasets(a, b), InvalidArgument);
  b.sessions = {session("B", 1)};
  a.qrels.add("X", "d", 1);
  b.qrels.add("X", "d", 1);
  CHECK_THROWS_AS(aug::merge_datasets(a, b), InvalidArgument);
}

TEST_CASE("expansion arithmetic on a small corpus") {
  llm::MockBackend mock;
  aug::Dataset d;
  for (int i = 0; i < 10; ++i) {
    d.sessions.push_back(session("S" + std::to_string(i), 3));
    for (int t = 1; t <= 3; ++t) d.qrels.add(default_turn_id("S" + std::to_string(i), t), "p", 1);
  }
  const auto out = aug::augment_dataset(d, {}, mock);
  CHECK(out.augmented.sessions.size() == 60);
  const auto merged = aug::merge_datasets(d, out.augmented);
  CHECK(aug::count_judged_turns(merged) == 90);
}
