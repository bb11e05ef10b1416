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

#include "query_aug.hpp"

#include <algorithm>
#include <atomic>
#include <iostream>
#include <set>
#include <thread>

#include "errors.hpp"
#include "text.hpp"

namespace convsdg::aug {
namespace {

// First non-empty line, without wrapping quotes.
std::string clean_rewrite(const std::string& raw) {
  for (const auto& line : split(raw, '\n')) {
    auto s = trim(line);
    if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front())
      s = trim(s.substr(1, s.size() - 2));
    if (!s.empty()) return s;
  }
  return {};
}

}  // namespace

std::string augmented_id(const std::string& turn_id, int i) {
  return turn_id + "#a" + std::to_string(i);
}

RewriteResult rewrite_turn(const std::string& query, int t, llm::TextBackend& backend,
                           const llm::GenerationParams& params, int retry_budget) {
  if (trim(query).empty()) throw InvalidArgument("query must not be empty");
  if (t < 1) throw InvalidArgument("t must be >= 1");
  const auto prompt = llm::render_rewrite_prompt(query);
  const std::uint64_t base = params.seed.value_or(0);

  RewriteResult result;
  for (int i = 0; i < t; ++i) {
    const std::uint64_t seed_i = mix_seed(base, static_cast<std::uint64_t>(i));
    std::string rewrite;
    for (int attempt = 0; attempt <= retry_budget && rewrite.empty(); ++attempt) {
      auto p = params;
      p.seed = attempt == 0 ? seed_i : mix_seed(seed_i, 1000 + attempt);
      try {
        rewrite = clean_rewrite(llm::generate(prompt, p, backend));
      } catch (const ParseError&) {
        rewrite.clear();
      }
    }
    if (rewrite.empty()) {
      std::cerr << "warning: no usable rewrite for '" << query
                << "', keeping the original text\n";
      rewrite = query;
      ++result.substituted;
    } else if (to_lower(rewrite) == to_lower(trim(query))) {
      ++result.degenerate;
    }
    result.rewrites.push_back(std::move(rewrite));
  }
  return result;
}

AugmentResult augment_dataset(const Dataset& original, const AugmentationConfig& cfg,
                              llm::TextBackend& backend) {
  if (cfg.t < 1) throw InvalidArgument("t must be >= 1");
  if (original.qrels.source != QrelsSource::manual)
    throw InvalidArgument("query-level augmentation needs manual judgments");

  struct Job {
    const ConversationSession* session;
    std::size_t turn_index;
  };
  AugmentResult out;
  std::vector<Job> jobs;
  for (const auto& s : original.sessions) {
    for (std::size_t i = 0; i < s.turns.size(); ++i) {
      const auto* judged = original.qrels.find(s.turns[i].turn_id);
      if (judged == nullptr || judged->empty()) {
        std::cerr << "warning: turn '" << s.turns[i].turn_id
                  << "' has no judgments, not augmented\n";
        ++out.report.skipped_turns;
        continue;
      }
      jobs.push_back({&s, i});
    }
  }
  out.report.annotated_turns = static_cast<int>(jobs.size());

  std::vector<RewriteResult> rewrites(jobs.size());
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> failures(jobs.size());
  auto worker = [&] {
    for (std::size_t j = next++; j < jobs.size(); j = next++) {
      const auto& turn = jobs[j].session->turns[jobs[j].turn_index];
      auto p = cfg.params;
      p.seed = mix_seed(cfg.params.seed.value_or(0), fnv1a64(turn.turn_id));
      try {
        rewrites[j] = rewrite_turn(turn.query, cfg.t, backend, p, cfg.retry_budget);
      } catch (...) {
        failures[j] = std::current_exception();
      }
    }
  };
  const int n_threads =
      std::clamp(cfg.parallelism, 1, static_cast<int>(std::max<std::size_t>(jobs.size(), 1)));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
  }
  for (const auto& f : failures)
    if (f) std::rethrow_exception(f);

  out.augmented.qrels.source = QrelsSource::manual;
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    const auto& src = *jobs[j].session;
    const auto& turn = src.turns[jobs[j].turn_index];
    const auto& grades = *original.qrels.find(turn.turn_id);
    out.report.degenerate_rewrites += rewrites[j].degenerate;
    out.report.substituted_rewrites += rewrites[j].substituted;
    for (int i = 1; i <= cfg.t; ++i) {
      ConversationSession sample;
      sample.session_id = augmented_id(turn.turn_id, i);
      sample.topic = src.topic;
      sample.provenance = Provenance::query_augmented;
      for (std::size_t k = 0; k <= jobs[j].turn_index; ++k) {
        QueryTurn copy = src.turns[k];
        copy.rewrites.clear();
        copy.turn_id = default_turn_id(sample.session_id, copy.ordinal);
        sample.turns.push_back(std::move(copy));
      }
      auto& target = sample.turns.back();
      target.query = rewrites[j].rewrites[static_cast<std::size_t>(i - 1)];
      target.turn_id = sample.session_id;
      for (const auto& [pid, grade] : grades)
        out.augmented.qrels.add(target.turn_id, pid, grade);
      out.augmented.sessions.push_back(std::move(sample));
      ++out.report.augmented_turns;
    }
  }
  return out;
}

Dataset merge_datasets(const Dataset& original, const Dataset& augmented) {
  Dataset merged;
  merged.qrels.source = original.qrels.source;
  std::set<std::string> session_ids;
  std::set<std::string> turn_ids;
  auto take = [&](const ConversationSession& s) {
    if (!session_ids.insert(s.session_id).second)
      throw InvalidArgument("session id collision on merge: '" + s.session_id + "'");
    for (const auto& t : s.turns)
      if (!turn_ids.insert(t.turn_id).second)
        throw InvalidArgument("turn id collision on merge: '" + t.turn_id + "'");
    merged.sessions.push_back(s);
  };
  for (const auto& s : original.sessions) take(s);
  for (const auto& s : augmented.sessions) take(s);

  merged.qrels.by_query = original.qrels.by_query;
  for (const auto& [qid, judgments] : augmented.qrels.by_query) {
    if (merged.qrels.by_query.count(qid))
      throw InvalidArgument("qrels query id collision on merge: '" + qid + "'");
    merged.qrels.by_query.emplace(qid, judgments);
  }
  return merged;
}

std::size_t count_judged_turns(const Dataset& data) {
  std::size_t n = 0;
  for (const auto& s : data.sessions)
    for (const auto& t : s.turns) {
      const auto* j = data.qrels.find(t.turn_id);
      if (j != nullptr && !j->empty()) ++n;
    }
  return n;
}

}  // namespace convsdg::aug
