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

// Pseudo-relevance labels for generated sessions: each turn is expanded with
// its context, retrieved against the collection, and m of the top_k hits are
// drawn at random as positives (grade 1).

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "datamodel.hpp"
#include "retriever.hpp"

namespace convsdg::prf {

enum class QueryForm {
  q_plus_a,                // q_i a_i
  q_plus_a_plus_topic,     // q_i a_i topic
  convq_plus_topic,        // q_1 .. q_i topic
  convq_conva_plus_topic,  // q_1 a_1 .. q_i a_i topic
};

inline constexpr std::array<QueryForm, 4> kAllForms = {
    QueryForm::q_plus_a, QueryForm::q_plus_a_plus_topic, QueryForm::convq_plus_topic,
    QueryForm::convq_conva_plus_topic};

// Short codes used on the command line: qa, qat, cqt, cqat.
std::string_view form_code(QueryForm form);
QueryForm parse_form(std::string_view code);

struct PrfConfig {
  int top_k = 5;
  int m = 3;
  std::uint64_t seed = 0;
  QueryForm form = QueryForm::q_plus_a_plus_topic;
};

// turn_index is 1-based. The topic part is the topic description. Throws
// InvalidArgument for an out-of-range index or a missing answer that the
// form needs.
std::string build_query_form(const ConversationSession& session, int turn_index,
                             QueryForm form);

// Draws min(m, |candidates|) distinct pids uniformly without replacement
// from the stream seeded by (seed, turn_id). Returned in draw order.
std::vector<std::string> sample_pseudo_positives(const std::vector<ScoredPassage>& candidates,
                                                 int m, std::uint64_t seed,
                                                 std::string_view turn_id);

struct PrfReport {
  int labeled_turns = 0;
  int skipped_turns = 0;
};

struct PrfResult {
  Qrels qrels;  // source = pseudo
  PrfReport report;
};

PrfResult assign_pseudo_labels(const std::vector<ConversationSession>& sessions,
                               const retrieval::Retriever& retriever, const PrfConfig& cfg);

}  // namespace convsdg::prf
