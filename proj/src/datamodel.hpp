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

// Core records (passages, sessions, judgments, runs) and their on-disk
// formats:
//
//   collection  MS MARCO style TSV, one `pid<TAB>text` per line
//   qrels       TREC qrels, `query_id 0 pid grade`
//   run         TREC run, `query_id Q0 pid rank score tag`
//   sessions    JSON lines, one ConversationSession object per line
//
// Readers reject anything that violates an invariant; nothing is repaired.

#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace convsdg {

struct Passage {
  std::string pid;
  std::string text;
  // Set when the text has no tokens; such passages still count as documents.
  bool degenerate = false;

  bool operator==(const Passage&) const = default;
};

struct CollectionStats {
  std::size_t doc_count = 0;
  double avg_doc_len = 0.0;
  std::unordered_map<std::string, std::size_t> df;
};

// Passages ordered by pid, with the token statistics BM25 needs.
class PassageCollection {
 public:
  PassageCollection() = default;

  // Throws FormatError on an empty or duplicate pid.
  static PassageCollection from_passages(std::vector<Passage> passages);

  std::size_t size() const { return passages_.size(); }
  bool empty() const { return passages_.empty(); }
  const std::vector<Passage>& passages() const { return passages_; }
  const Passage& at(std::size_t index) const { return passages_.at(index); }
  std::optional<std::size_t> index_of(std::string_view pid) const;
  const Passage* find(std::string_view pid) const;

  const CollectionStats& stats() const { return stats_; }
  std::size_t doc_length(std::size_t index) const { return doc_len_.at(index); }
  const std::unordered_map<std::string, std::uint32_t>& term_freqs(
      std::size_t index) const {
    return tf_.at(index);
  }

 private:
  std::vector<Passage> passages_;
  std::unordered_map<std::string, std::size_t> by_pid_;
  std::vector<std::size_t> doc_len_;
  std::vector<std::unordered_map<std::string, std::uint32_t>> tf_;
  CollectionStats stats_;
};

PassageCollection load_collection(const std::filesystem::path& path);
void write_collection(const PassageCollection& collection,
                      const std::filesystem::path& path);

struct TopicDescription {
  std::string topic_id;
  std::string title;
  std::string description;

  bool operator==(const TopicDescription&) const = default;
};

struct QueryTurn {
  std::string turn_id;
  int ordinal = 0;
  std::string query;
  std::optional<std::string> answer;
  std::vector<std::string> rewrites;

  bool operator==(const QueryTurn&) const = default;
};

enum class Provenance { manual, dialogue_generated, query_augmented };

std::string_view to_string(Provenance p);
Provenance parse_provenance(std::string_view s);

struct ConversationSession {
  std::string session_id;
  TopicDescription topic;
  std::vector<QueryTurn> turns;
  Provenance provenance = Provenance::manual;

  bool operator==(const ConversationSession&) const = default;
};

// "<session_id>_<ordinal>", the default id of a turn.
std::string default_turn_id(std::string_view session_id, int ordinal);

// Throws FormatError when the session breaks an invariant: no turns,
// ordinals not 1..n, an empty query, or an empty topic description.
void validate_session(const ConversationSession& session);

std::vector<ConversationSession> read_sessions(const std::filesystem::path& path);
void write_sessions(const std::vector<ConversationSession>& sessions,
                    const std::filesystem::path& path);
std::vector<TopicDescription> read_topics(const std::filesystem::path& path);
void write_topics(const std::vector<TopicDescription>& topics,
                  const std::filesystem::path& path);

enum class QrelsSource { manual, pseudo };

// Grades for one query, keyed by pid.
using QueryJudgments = std::map<std::string, int>;

struct Qrels {
  std::map<std::string, QueryJudgments> by_query;
  QrelsSource source = QrelsSource::manual;

  // Throws FormatError on a negative grade or an existing key.
  void add(const std::string& query_id, const std::string& pid, int grade);
  const QueryJudgments* find(std::string_view query_id) const;
  std::size_t size() const;

  bool operator==(const Qrels&) const = default;
};

Qrels read_qrels(const std::filesystem::path& path,
                 QrelsSource source = QrelsSource::manual);
void write_qrels(const Qrels& qrels, const std::filesystem::path& path);

struct RankedEntry {
  std::string pid;
  int rank = 0;
  double score = 0.0;

  bool operator==(const RankedEntry&) const = default;
};

struct ScoredPassage {
  std::string pid;
  double score = 0.0;
};

// Orders by descending score, then ascending pid. Every ranking in the
// library goes through this so runs are reproducible.
void sort_by_tiebreak(std::vector<ScoredPassage>& results);

struct RankedRun {
  std::string tag = "convsdg";
  std::map<std::string, std::vector<RankedEntry>> by_query;

  // Sorts with the global tie-break and assigns ranks from 1.
  void set_ranking(const std::string& query_id,
                   std::vector<ScoredPassage> results);
  std::vector<std::string> ranked_pids(std::string_view query_id) const;
};

// Throws FormatError unless ranks are 1..n, scores are non-increasing and
// pids are unique per query.
void validate_run(const RankedRun& run);
void write_run(const RankedRun& run, const std::filesystem::path& path);
RankedRun read_run(const std::filesystem::path& path);

}  // namespace convsdg
