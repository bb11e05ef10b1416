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

// Dialogue-level generation: one LLM call produces a whole session from a
// topic description.

#pragma once

#include <string>
#include <vector>

#include "datamodel.hpp"
#include "llm_gateway.hpp"

namespace convsdg::gen {

inline constexpr int kDefaultTurns = 8;
inline constexpr int kParseRetryBudget = 3;

// Renders the dialogue prompt, generates and parses. A ParseError triggers
// up to `retry_budget` regenerations, each with a fresh derived seed.
// Throws GenerationFailed once the budget is spent.
ConversationSession generate_dialogue_session(const TopicDescription& topic,
                                              int n_turns,
                                              llm::TextBackend& backend,
                                              const llm::GenerationParams& params,
                                              std::string session_id = {},
                                              int retry_budget = kParseRetryBudget);

struct CorpusReport {
  int requested = 0;
  int produced = 0;
  int failed = 0;
  std::vector<std::string> failures;  // "<session_id>: <reason>"
};

struct SessionCorpus {
  std::vector<ConversationSession> sessions;
  CorpusReport report;
};

struct CorpusOptions {
  int sessions_per_topic = 1;
  int n_turns = kDefaultTurns;
  int parallelism = 1;
  int retry_budget = kParseRetryBudget;
};

// Session k of topic T is named "T-g<k>" (k from 1) and generated with a
// seed derived from (params.seed, k) only, so results do not depend on the
// order of `topics`. Failed sessions are skipped and reported. Output order
// follows input order regardless of parallelism.
SessionCorpus generate_session_corpus(const std::vector<TopicDescription>& topics,
                                      const CorpusOptions& options,
                                      llm::TextBackend& backend,
                                      const llm::GenerationParams& params);

}  // namespace convsdg::gen
