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

#include "synthetic.hpp"

#include <array>
#include <cstdio>
#include <set>

#include "errors.hpp"
#include "text.hpp"

namespace convsdg::synthetic {
namespace {

constexpr int kCoreWords = 10;
constexpr int kSubtopicWords = 8;
constexpr int kPassageLen = 40;
// Subtopic words named in the topic description and used by queries.
constexpr std::uint64_t kAskedWords = 4;

constexpr std::array<std::string_view, 48> kFiller = {
    "the",    "of",      "and",     "to",      "in",     "is",      "what",   "how",
    "does",   "it",      "about",   "tell",    "me",     "more",    "which",  "are",
    "for",    "with",    "that",    "this",    "can",    "you",     "some",   "also",
    "people", "often",   "many",    "way",     "used",   "known",   "part",   "most",
    "time",   "general", "common",  "example", "during", "between", "other",  "such",
    "one",    "year",    "several", "related", "first",  "called",  "based",  "where"};

constexpr std::array<std::string_view, 14> kOnsets = {"b", "d", "f", "g", "k", "l", "m",
                                                      "n", "p", "r", "s", "t", "v", "z"};
constexpr std::array<std::string_view, 6> kVowels = {"a", "e", "i", "o", "u", "ai"};

class WordMint {
 public:
  explicit WordMint(Rng& rng) : rng_(rng) {
    for (auto w : kFiller) used_.insert(std::string(w));
  }

  std::string next() {
    for (;;) {
      std::string w;
      const auto syllables = 2 + rng_.below(2);
      for (std::uint64_t s = 0; s < syllables; ++s) {
        w += kOnsets[rng_.below(kOnsets.size())];
        w += kVowels[rng_.below(kVowels.size())];
      }
      w += kOnsets[rng_.below(kOnsets.size())];
      if (used_.insert(w).second) return w;
    }
  }

 private:
  Rng& rng_;
  std::set<std::string> used_;
};

struct TopicVocab {
  std::vector<std::string> core;
  std::vector<std::vector<std::string>> subtopics;
};

std::string pick(Rng& rng, const std::vector<std::string>& words) {
  return words[rng.below(words.size())];
}

std::string filler(Rng& rng) { return std::string(kFiller[rng.below(kFiller.size())]); }

std::string make_passage(Rng& rng, const TopicVocab& v, int subtopic, int density) {
  std::vector<std::string> tokens;
  const int sub_count = 10 + density;
  const int core_count = 8;
  for (int i = 0; i < sub_count; ++i)
    tokens.push_back(pick(rng, v.subtopics[static_cast<std::size_t>(subtopic)]));
  for (int i = 0; i < core_count; ++i) tokens.push_back(pick(rng, v.core));
  while (static_cast<int>(tokens.size()) < kPassageLen) tokens.push_back(filler(rng));
  rng.shuffle(tokens);
  return join(tokens, " ");
}

std::string make_query(Rng& rng, const TopicVocab& v, int subtopic, bool first) {
  const auto& sub = v.subtopics[static_cast<std::size_t>(subtopic)];
  const auto a = sub[rng.below(kAskedWords)];
  auto b = sub[rng.below(kAskedWords)];
  while (b == a) b = sub[rng.below(kAskedWords)];
  if (first) return "what is the " + a + " " + b + " of " + v.core[rng.below(3)];
  switch (rng.below(3)) {
    case 0:
      return "how does it relate to " + a + " and " + b;
    case 1:
      return "tell me more about the " + a + " " + b;
    default:
      return "which " + a + " are used with " + b;
  }
}

// Every turn of a session asks about the same subtopic.
ConversationSession make_session(Rng& rng, const TopicDescription& topic, const TopicVocab& v,
                                 const std::string& id, int turns, int subtopic) {
  ConversationSession s;
  s.session_id = id;
  s.topic = topic;
  s.provenance = Provenance::manual;
  for (int t = 0; t < turns; ++t) {
    QueryTurn turn;
    turn.ordinal = t + 1;
    turn.turn_id = default_turn_id(id, turn.ordinal);
    turn.query = make_query(rng, v, subtopic, t == 0);
    s.turns.push_back(std::move(turn));
  }
  return s;
}

}  // namespace

DeskFixture make_desk_fixture(const FixtureOptions& o) {
  if (o.topics < 1 || o.subtopics < 1 || o.passages_per_subtopic < 1 || o.session_turns < 1)
    throw InvalidArgument("fixture sizes must be >= 1");
  Rng rng(mix_seed(o.seed, 0xde5cULL));
  WordMint mint(rng);

  std::vector<TopicVocab> vocab(static_cast<std::size_t>(o.topics));
  for (auto& v : vocab) {
    for (int i = 0; i < kCoreWords; ++i) v.core.push_back(mint.next());
    v.subtopics.resize(static_cast<std::size_t>(o.subtopics));
    for (auto& sub : v.subtopics)
      for (int i = 0; i < kSubtopicWords; ++i) sub.push_back(mint.next());
  }

  DeskFixture fx;
  std::vector<Passage> passages;
  // pid lists per (topic, subtopic); the first two of each are the densest.
  std::vector<std::vector<std::vector<std::string>>> pids(vocab.size());
  char buf[32];
  for (std::size_t t = 0; t < vocab.size(); ++t) {
    pids[t].resize(static_cast<std::size_t>(o.subtopics));
    for (int s = 0; s < o.subtopics; ++s) {
      for (int p = 0; p < o.passages_per_subtopic; ++p) {
        std::snprintf(buf, sizeof buf, "d%02zu%02d%03d", t, s, p);
        const int density = p < 2 ? 6 : 0;
        passages.push_back({buf, make_passage(rng, vocab[t], s, density), false});
        pids[t][static_cast<std::size_t>(s)].push_back(buf);
      }
    }

    TopicDescription topic;
    std::snprintf(buf, sizeof buf, "T%02zu", t + 1);
    topic.topic_id = buf;
    topic.title = vocab[t].core[0] + " " + vocab[t].core[1];
    std::string desc = "The user wants to learn about " + vocab[t].core[0] + " " +
                       vocab[t].core[1] + " and " + vocab[t].core[2] + ", including";
    for (const auto& sub : vocab[t].subtopics)
      for (std::uint64_t i = 0; i < kAskedWords; ++i) desc += " " + sub[i];
    topic.description = desc + ".";
    fx.topics.push_back(topic);
  }
  fx.collection = PassageCollection::from_passages(std::move(passages));

  auto judge = [&](Qrels& qrels, const ConversationSession& s, std::size_t t, int subtopic) {
    const auto& list = pids[t][static_cast<std::size_t>(subtopic)];
    for (const auto& turn : s.turns)
      for (std::size_t p = 0; p < list.size(); ++p) qrels.add(turn.turn_id, list[p], p < 2 ? 2 : 1);
  };

  for (std::size_t t = 0; t < vocab.size(); ++t) {
    std::vector<int> order(static_cast<std::size_t>(o.subtopics));
    for (int i = 0; i < o.subtopics; ++i) order[static_cast<std::size_t>(i)] = i;
    rng.shuffle(order);
    std::size_t next = 0;
    auto subtopic = [&] { return order[next++ % order.size()]; };
    for (int e = 0; e < o.eval_sessions_per_topic; ++e) {
      const int sub = subtopic();
      const auto id = fx.topics[t].topic_id + "-e" + std::to_string(e + 1);
      auto s = make_session(rng, fx.topics[t], vocab[t], id, o.session_turns, sub);
      judge(fx.eval.qrels, s, t, sub);
      fx.eval.sessions.push_back(std::move(s));
    }
    for (int e = 0; e < o.train_sessions_per_topic; ++e) {
      const int sub = subtopic();
      const auto id = fx.topics[t].topic_id + "-m" + std::to_string(e + 1);
      auto s = make_session(rng, fx.topics[t], vocab[t], id, o.session_turns, sub);
      judge(fx.train.qrels, s, t, sub);
      fx.train.sessions.push_back(std::move(s));
    }
  }
  return fx;
}

FixturePaths write_desk_fixture(const DeskFixture& fx, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  FixturePaths p{dir / "collection.tsv",  dir / "topics.jsonl",
                 dir / "eval_sessions.jsonl", dir / "eval_qrels.txt",
                 dir / "train_sessions.jsonl", dir / "train_qrels.txt"};
  write_collection(fx.collection, p.collection);
  write_topics(fx.topics, p.topics);
  write_sessions(fx.eval.sessions, p.eval_sessions);
  write_qrels(fx.eval.qrels, p.eval_qrels);
  write_sessions(fx.train.sessions, p.train_sessions);
  write_qrels(fx.train.qrels, p.train_qrels);
  return p;
}

}  // namespace convsdg::synthetic
