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

#include "supervision.hpp"

#include <iostream>

#include "errors.hpp"
#include "text.hpp"

namespace convsdg::prf {

std::string_view form_code(QueryForm form) {
  switch (form) {
    case QueryForm::q_plus_a: return "qa";
    case QueryForm::q_plus_a_plus_topic: return "qat";
    case QueryForm::convq_plus_topic: return "cqt";
    case QueryForm::convq_conva_plus_topic: return "cqat";
  }
  return "qat";
}

QueryForm parse_form(std::string_view code) {
  for (auto f : kAllForms)
    if (form_code(f) == code) return f;
  throw InvalidArgument("unknown query form '" + std::string(code) +
                        "' (expected qa, qat, cqt or cqat)");
}

std::string build_query_form(const ConversationSession& session, int turn_index,
                             QueryForm form) {
  if (turn_index < 1 || turn_index > static_cast<int>(session.turns.size()))
    throw InvalidArgument("turn index " + std::to_string(turn_index) + " out of range");
  const auto n = static_cast<std::size_t>(turn_index);
  auto answer_of = [&](std::size_t i) -> const std::string& {
    const auto& t = session.turns[i];
    if (!t.answer || trim(*t.answer).empty())
      throw InvalidArgument("query form " + std::string(form_code(form)) +
                            " needs an answer for turn '" + t.turn_id + "'");
    return *t.answer;
  };

  std::vector<std::string> parts;
  switch (form) {
    case QueryForm::q_plus_a:
    case QueryForm::q_plus_a_plus_topic:
      parts.push_back(session.turns[n - 1].query);
      parts.push_back(answer_of(n - 1));
      break;
    case QueryForm::convq_plus_topic:
      for (std::size_t i = 0; i < n; ++i) parts.push_back(session.turns[i].query);
      break;
    case QueryForm::convq_conva_plus_topic:
      for (std::size_t i = 0; i < n; ++i) {
        parts.push_back(session.turns[i].query);
        parts.push_back(answer_of(i));
      }
      break;
  }
  if (form != QueryForm::q_plus_a) parts.push_back(session.topic.description);
  return join(parts, " ");
}

std::vector<std::string> sample_pseudo_positives(const std::vector<ScoredPassage>& candidates,
                                                 int m, std::uint64_t seed,
                                                 std::string_view turn_id) {
  std::vector<std::size_t> order(candidates.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const auto take = std::min(order.size(), static_cast<std::size_t>(std::max(m, 0)));
  Rng rng(mix_seed(seed, fnv1a64(turn_id)));
  // Partial Fisher-Yates: the first `take` slots become a uniform sample.
  for (std::size_t i = 0; i < take; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(order.size() - i));
    std::swap(order[i], order[j]);
  }
  std::vector<std::string> out;
  for (std::size_t i = 0; i < take; ++i) out.push_back(candidates[order[i]].pid);
  return out;
}

PrfResult assign_pseudo_labels(const std::vector<ConversationSession>& sessions,
                               const retrieval::Retriever& retriever, const PrfConfig& cfg) {
  if (cfg.m < 1 || cfg.m > cfg.top_k) throw InvalidArgument("PRF needs 1 <= m <= top_k");
  PrfResult result;
  result.qrels.source = QrelsSource::pseudo;
  for (const auto& session : sessions) {
    for (std::size_t i = 0; i < session.turns.size(); ++i) {
      const auto& turn = session.turns[i];
      std::string query;
      try {
        query = build_query_form(session, static_cast<int>(i) + 1, cfg.form);
      } catch (const InvalidArgument& e) {
        std::cerr << "warning: skipping turn '" << turn.turn_id << "': " << e.what() << '\n';
        ++result.report.skipped_turns;
        continue;
      }
      auto hits = retriever.search(query, cfg.top_k);
      if (hits.empty()) {
        std::cerr << "warning: no retrieval results for turn '" << turn.turn_id << "'\n";
        ++result.report.skipped_turns;
        continue;
      }
      for (const auto& pid : sample_pseudo_positives(hits, cfg.m, cfg.seed, turn.turn_id))
        result.qrels.add(turn.turn_id, pid, 1);
      ++result.report.labeled_turns;
    }
  }
  return result;
}

}  // namespace convsdg::prf
