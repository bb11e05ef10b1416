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

#include "datamodel.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "errors.hpp"
#include "text.hpp"

namespace convsdg {
namespace {

using ordered_json = nlohmann::ordered_json;

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

std::string where(const std::filesystem::path& path, std::size_t line_no) {
  return path.string() + ":" + std::to_string(line_no);
}

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> fields;
  std::string f;
  while (ss >> f) fields.push_back(f);
  return fields;
}

std::optional<long long> parse_integer(std::string_view s) {
  long long value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

ordered_json topic_to_json(const TopicDescription& t) {
  ordered_json j;
  j["topic_id"] = t.topic_id;
  j["title"] = t.title;
  j["description"] = t.description;
  return j;
}

TopicDescription topic_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw FormatError("topic must be an object");
  TopicDescription t;
  t.topic_id = j.value("topic_id", "");
  t.title = j.value("title", "");
  t.description = j.value("description", "");
  return t;
}

ordered_json session_to_json(const ConversationSession& s) {
  ordered_json j;
  j["session_id"] = s.session_id;
  j["provenance"] = std::string(to_string(s.provenance));
  j["topic"] = topic_to_json(s.topic);
  ordered_json turns = ordered_json::array();
  for (const auto& t : s.turns) {
    ordered_json jt;
    jt["turn_id"] = t.turn_id;
    jt["ordinal"] = t.ordinal;
    jt["query"] = t.query;
    jt["answer"] = t.answer ? ordered_json(*t.answer) : ordered_json(nullptr);
    jt["rewrites"] = t.rewrites;
    turns.push_back(std::move(jt));
  }
  j["turns"] = std::move(turns);
  return j;
}

ConversationSession session_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw FormatError("session must be a JSON object");
  ConversationSession s;
  if (!j.contains("session_id") || !j["session_id"].is_string())
    throw FormatError("missing \"session_id\"");
  s.session_id = j["session_id"].get<std::string>();
  s.provenance = parse_provenance(j.value("provenance", "manual"));
  if (!j.contains("topic")) throw FormatError("missing \"topic\"");
  s.topic = topic_from_json(j["topic"]);
  if (!j.contains("turns") || !j["turns"].is_array())
    throw FormatError("missing \"turns\" array");
  for (const auto& jt : j["turns"]) {
    QueryTurn t;
    if (!jt.contains("ordinal") || !jt["ordinal"].is_number_integer())
      throw FormatError("turn without integer \"ordinal\"");
    t.ordinal = jt["ordinal"].get<int>();
    if (!jt.contains("query") || !jt["query"].is_string())
      throw FormatError("turn " + std::to_string(t.ordinal) +
                        " is missing \"query\"");
    t.query = jt["query"].get<std::string>();
    if (jt.contains("answer") && !jt["answer"].is_null())
      t.answer = jt["answer"].get<std::string>();
    if (jt.contains("rewrites"))
      t.rewrites = jt["rewrites"].get<std::vector<std::string>>();
    t.turn_id = jt.contains("turn_id")
                    ? jt["turn_id"].get<std::string>()
                    : default_turn_id(s.session_id, t.ordinal);
    s.turns.push_back(std::move(t));
  }
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// Collection

PassageCollection PassageCollection::from_passages(std::vector<Passage> passages) {
  std::sort(passages.begin(), passages.end(),
            [](const Passage& a, const Passage& b) { return a.pid < b.pid; });
  PassageCollection c;
  c.passages_ = std::move(passages);
  c.doc_len_.reserve(c.passages_.size());
  c.tf_.reserve(c.passages_.size());
  std::size_t total_len = 0;
  for (std::size_t i = 0; i < c.passages_.size(); ++i) {
    auto& p = c.passages_[i];
    if (p.pid.empty()) throw FormatError("passage with empty pid");
    if (i > 0 && c.passages_[i - 1].pid == p.pid)
      throw FormatError("duplicate pid '" + p.pid + "'");
    c.by_pid_.emplace(p.pid, i);
    auto tokens = tokenize(p.text);
    p.degenerate = tokens.empty();
    std::unordered_map<std::string, std::uint32_t> tf;
    for (auto& tok : tokens) ++tf[tok];
    for (const auto& [term, _] : tf) ++c.stats_.df[term];
    total_len += tokens.size();
    c.doc_len_.push_back(tokens.size());
    c.tf_.push_back(std::move(tf));
  }
  c.stats_.doc_count = c.passages_.size();
  c.stats_.avg_doc_len =
      c.passages_.empty()
          ? 0.0
          : static_cast<double>(total_len) / static_cast<double>(c.passages_.size());
  return c;
}

std::optional<std::size_t> PassageCollection::index_of(std::string_view pid) const {
  auto it = by_pid_.find(std::string(pid));
  if (it == by_pid_.end()) return std::nullopt;
  return it->second;
}

const Passage* PassageCollection::find(std::string_view pid) const {
  auto idx = index_of(pid);
  return idx ? &passages_[*idx] : nullptr;
}

PassageCollection load_collection(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::vector<Passage> passages;
  std::unordered_map<std::string, std::size_t> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0)
      throw FormatError(where(path, line_no) +
                        ": malformed collection line, expected pid<TAB>text");
    Passage p{line.substr(0, tab), line.substr(tab + 1), false};
    auto [it, inserted] = seen.emplace(p.pid, line_no);
    if (!inserted)
      throw FormatError(where(path, line_no) + ": duplicate pid '" + p.pid +
                        "' (first seen on line " + std::to_string(it->second) + ")");
    passages.push_back(std::move(p));
  }
  return PassageCollection::from_passages(std::move(passages));
}

void write_collection(const PassageCollection& collection,
                      const std::filesystem::path& path) {
  auto out = open_output(path);
  for (const auto& p : collection.passages()) {
    if (p.text.find_first_of("\t\n") != std::string::npos)
      throw FormatError("passage '" + p.pid + "' contains a tab or newline");
    out << p.pid << '\t' << p.text << '\n';
  }
}

// ---------------------------------------------------------------------------
// Sessions

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::manual: return "manual";
    case Provenance::dialogue_generated: return "dialogue_generated";
    case Provenance::query_augmented: return "query_augmented";
  }
  return "manual";
}

Provenance parse_provenance(std::string_view s) {
  if (s == "manual") return Provenance::manual;
  if (s == "dialogue_generated") return Provenance::dialogue_generated;
  if (s == "query_augmented") return Provenance::query_augmented;
  throw FormatError("unknown provenance '" + std::string(s) + "'");
}

std::string default_turn_id(std::string_view session_id, int ordinal) {
  return std::string(session_id) + "_" + std::to_string(ordinal);
}

void validate_session(const ConversationSession& session) {
  const std::string who = "session '" + session.session_id + "'";
  if (session.session_id.empty()) throw FormatError("session with empty id");
  if (session.turns.empty()) throw FormatError(who + " has no turns");
  if (trim(session.topic.description).empty())
    throw FormatError(who + " has an empty topic description");
  std::set<std::string> ids;
  for (std::size_t i = 0; i < session.turns.size(); ++i) {
    const auto& t = session.turns[i];
    const int expected = static_cast<int>(i) + 1;
    if (t.ordinal != expected)
      throw FormatError(who + ": turn ordinals must be contiguous from 1, found " +
                        std::to_string(t.ordinal) + " where " +
                        std::to_string(expected) + " was expected");
    if (trim(t.query).empty())
      throw FormatError(who + ": turn " + std::to_string(t.ordinal) +
                        " has an empty query");
    if (t.turn_id.empty() || !ids.insert(t.turn_id).second)
      throw FormatError(who + ": empty or repeated turn id '" + t.turn_id + "'");
  }
}

std::vector<ConversationSession> read_sessions(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::vector<ConversationSession> sessions;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (trim(line).empty()) continue;
    try {
      auto session = session_from_json(nlohmann::json::parse(line));
      validate_session(session);
      sessions.push_back(std::move(session));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(where(path, line_no) + ": " + e.what());
    } catch (const FormatError& e) {
      throw FormatError(where(path, line_no) + ": " + e.what());
    }
  }
  return sessions;
}

void write_sessions(const std::vector<ConversationSession>& sessions,
                    const std::filesystem::path& path) {
  auto out = open_output(path);
  for (const auto& s : sessions) {
    validate_session(s);
    out << session_to_json(s).dump() << '\n';
  }
}

std::vector<TopicDescription> read_topics(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::vector<TopicDescription> topics;
  std::set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (trim(line).empty()) continue;
    TopicDescription t;
    try {
      t = topic_from_json(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(where(path, line_no) + ": " + e.what());
    }
    if (t.topic_id.empty() || trim(t.description).empty())
      throw FormatError(where(path, line_no) +
                        ": topic needs a topic_id and a non-empty description");
    if (!ids.insert(t.topic_id).second)
      throw FormatError(where(path, line_no) + ": duplicate topic_id '" +
                        t.topic_id + "'");
    topics.push_back(std::move(t));
  }
  return topics;
}

void write_topics(const std::vector<TopicDescription>& topics,
                  const std::filesystem::path& path) {
  auto out = open_output(path);
  for (const auto& t : topics) out << topic_to_json(t).dump() << '\n';
}

// ---------------------------------------------------------------------------
// Qrels

void Qrels::add(const std::string& query_id, const std::string& pid, int grade) {
  if (grade < 0)
    throw FormatError("negative grade " + std::to_string(grade) + " for (" +
                      query_id + ", " + pid + ")");
  auto [it, inserted] = by_query[query_id].emplace(pid, grade);
  if (!inserted)
    throw FormatError("duplicate judgment for (" + query_id + ", " + pid + ")");
}

const QueryJudgments* Qrels::find(std::string_view query_id) const {
  auto it = by_query.find(std::string(query_id));
  return it == by_query.end() ? nullptr : &it->second;
}

std::size_t Qrels::size() const {
  std::size_t n = 0;
  for (const auto& [_, j] : by_query) n += j.size();
  return n;
}

Qrels read_qrels(const std::filesystem::path& path, QrelsSource source) {
  auto in = open_input(path);
  Qrels qrels;
  qrels.source = source;
  std::map<std::pair<std::string, std::string>, std::pair<std::size_t, std::string>>
      first_seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    auto fields = split_ws(line);
    if (fields.empty()) continue;
    if (fields.size() != 4)
      throw FormatError(where(path, line_no) +
                        ": expected 'query_id 0 pid grade', got " +
                        std::to_string(fields.size()) + " fields");
    auto grade = parse_integer(fields[3]);
    if (!grade)
      throw FormatError(where(path, line_no) + ": non-integer grade '" +
                        fields[3] + "'");
    if (*grade < 0)
      throw FormatError(where(path, line_no) + ": negative grade " + fields[3]);
    auto key = std::make_pair(fields[0], fields[2]);
    auto [it, inserted] = first_seen.emplace(key, std::make_pair(line_no, line));
    if (!inserted)
      throw FormatError(where(path, line_no) + ": duplicate judgment for (" +
                        fields[0] + ", " + fields[2] + "): line " +
                        std::to_string(it->second.first) + " '" + it->second.second +
                        "' vs line " + std::to_string(line_no) + " '" + line + "'");
    qrels.add(fields[0], fields[2], static_cast<int>(*grade));
  }
  return qrels;
}

void write_qrels(const Qrels& qrels, const std::filesystem::path& path) {
  auto out = open_output(path);
  for (const auto& [qid, judgments] : qrels.by_query)
    for (const auto& [pid, grade] : judgments)
      out << qid << " 0 " << pid << ' ' << grade << '\n';
}

// ---------------------------------------------------------------------------
// Runs

void sort_by_tiebreak(std::vector<ScoredPassage>& results) {
  std::sort(results.begin(), results.end(),
            [](const ScoredPassage& a, const ScoredPassage& b) {
              if (a.score != b.score) return a.score > b.score;
              return a.pid < b.pid;
            });
}

void RankedRun::set_ranking(const std::string& query_id,
                            std::vector<ScoredPassage> results) {
  sort_by_tiebreak(results);
  auto& entries = by_query[query_id];
  entries.clear();
  entries.reserve(results.size());
  int rank = 1;
  for (auto& r : results) entries.push_back({std::move(r.pid), rank++, r.score});
}

std::vector<std::string> RankedRun::ranked_pids(std::string_view query_id) const {
  std::vector<std::string> pids;
  auto it = by_query.find(std::string(query_id));
  if (it == by_query.end()) return pids;
  pids.reserve(it->second.size());
  for (const auto& e : it->second) pids.push_back(e.pid);
  return pids;
}

void validate_run(const RankedRun& run) {
  for (const auto& [qid, entries] : run.by_query) {
    std::set<std::string> pids;
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const auto& e = entries[i];
      if (e.rank != static_cast<int>(i) + 1)
        throw FormatError("query '" + qid + "': ranks are not contiguous from 1 (rank " +
                          std::to_string(e.rank) + " at position " +
                          std::to_string(i + 1) + ")");
      if (i > 0 && e.score > entries[i - 1].score)
        throw FormatError("query '" + qid + "': score increases at rank " +
                          std::to_string(e.rank));
      if (!pids.insert(e.pid).second)
        throw FormatError("query '" + qid + "': pid '" + e.pid + "' ranked twice");
    }
  }
}

void write_run(const RankedRun& run, const std::filesystem::path& path) {
  validate_run(run);
  auto out = open_output(path);
  char score[64];
  for (const auto& [qid, entries] : run.by_query) {
    for (const auto& e : entries) {
      std::snprintf(score, sizeof score, "%.9g", e.score);
      out << qid << " Q0 " << e.pid << ' ' << e.rank << ' ' << score << ' '
          << run.tag << '\n';
    }
  }
}

RankedRun read_run(const std::filesystem::path& path) {
  auto in = open_input(path);
  RankedRun run;
  bool tag_set = false;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    auto f = split_ws(line);
    if (f.empty()) continue;
    if (f.size() != 6)
      throw FormatError(where(path, line_no) +
                        ": expected 'query_id Q0 pid rank score tag'");
    auto rank = parse_integer(f[3]);
    if (!rank) throw FormatError(where(path, line_no) + ": non-integer rank");
    char* end = nullptr;
    double score = std::strtod(f[4].c_str(), &end);
    if (end != f[4].c_str() + f[4].size())
      throw FormatError(where(path, line_no) + ": non-numeric score");
    if (!tag_set) {
      run.tag = f[5];
      tag_set = true;
    }
    run.by_query[f[0]].push_back({f[2], static_cast<int>(*rank), score});
  }
  for (auto& [_, entries] : run.by_query)
    std::stable_sort(entries.begin(), entries.end(),
                     [](const RankedEntry& a, const RankedEntry& b) {
                       return a.rank < b.rank;
                     });
  validate_run(run);
  return run;
}

}  // namespace convsdg
