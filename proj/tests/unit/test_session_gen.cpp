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

#include <atomic>

#include "errors.hpp"
#include "llm_gateway.hpp"
#include "session_gen.hpp"

using namespace convsdg;

namespace {

std::vector<TopicDescription> topics(int n) {
  std::vector<TopicDescription> out;
  for (int i = 1; i <= n; ++i)
    out.push_back({"T" + std::to_string(i), "topic " + std::to_string(i),
                   "Details on subject" + std::to_string(i) + " history and science"});
  return out;
}

struct Garbage : llm::TextBackend {
  std::atomic<int> calls{0};
  std::string complete(const std::string&, const llm::GenerationParams&) override {
    ++calls;
    return "I cannot help with that.";
  }
};

}  // namespace

TEST_CASE("mock session has the requested number of answered turns") {
  llm::MockBackend mock;
  llm::GenerationParams p;
  p.seed = 4;
  const auto s = gen::generate_dialogue_session(topics(1)[0], 5, mock, p, "T1-x");
  REQUIRE(s.turns.size() == 5);
  for (const auto& t : s.turns) {
    REQUIRE(t.answer.has_value());
    CHECK_FALSE(t.answer->empty());
    CHECK_FALSE(t.query.empty());
  }
  CHECK(s.provenance == Provenance::dialogue_generated);
  CHECK(s.session_id == "T1-x");
}

TEST_CASE("zero turns is rejected") {
  llm::MockBackend mock;
  CHECK_THROWS_AS(gen::generate_dialogue_session(topics(1)[0], 0, mock, {}), InvalidArgument);
}

TEST_CASE("same topic and seed give identical sessions") {
  llm::MockBackend mock;
  llm::GenerationParams p;
  p.seed = 77;
  CHECK(gen::generate_dialogue_session(topics(1)[0], 6, mock, p) ==
        gen::generate_dialogue_session(topics(1)[0], 6, mock, p));
}

TEST_CASE("corpus of four topics with two sessions each") {
  llm::MockBackend mock;
  llm::GenerationParams p;
  p.seed = 1;
  gen::CorpusOptions o;
  o.sessions_per_topic = 2;
  o.n_turns = 5;
  const auto corpus = gen::generate_session_corpus(topics(4), o, mock, p);
  CHECK(corpus.sessions.size() == 8);
  std::size_t turns = 0;
  for (const auto& s : corpus.sessions) turns += s.turns.size();
  CHECK(turns == 40);
  CHECK(corpus.report.produced == 8);
  CHECK(corpus.report.failed == 0);
  CHECK(corpus.sessions[0].session_id == "T1-g1");
  CHECK(corpus.sessions[1].session_id == "T1-g2");
}

TEST_CASE("parallel corpus generation matches sequential output") {
  llm::MockBackend mock;
  llm::GenerationParams p;
  p.seed = 5;
  gen::CorpusOptions o;
  o.sessions_per_topic = 3;
  o.n_turns = 4;
  const auto serial = gen::generate_session_corpus(topics(5), o, mock, p);
  o.parallelism = 4;
  const auto parallel = gen::generate_session_corpus(topics(5), o, mock, p);
  CHECK(serial.sessions == parallel.sessions);
}

TEST_CASE("backend that never yields a transcript") {
  Garbage garbage;
  gen::CorpusOptions o;
  o.sessions_per_topic = 2;
  o.n_turns = 5;
  o.retry_budget = 2;
  const auto corpus = gen::generate_session_corpus(topics(4), o, garbage, {});
  CHECK(corpus.sessions.empty());
  CHECK(corpus.report.failed == 8);
  CHECK(corpus.report.failures.size() == 8);
  CHECK(garbage.calls.load() == 8 * 3);
}

TEST_CASE("retry budget exhaustion raises generation failure") {
  Garbage garbage;
  CHECK_THROWS_AS(gen::generate_dialogue_session(topics(1)[0], 2, garbage, {}, "", 1),
                  GenerationFailed);
  CHECK(garbage.calls.load() == 2);
}
