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

// Query-level augmentation: every judged turn is rewritten t times and each
// rewrite inherits the judgments of the turn it came from.
//
// An augmented sample for turn Q (ordinal n) and rewrite i is a session with
// id "Q#a<i>" holding turns 1..n of the original session. Turns 1..n-1 keep
// their original text and get fresh ids ("Q#a<i>_<k>") that carry no
// judgments; turn n holds the rewrite and has the id "Q#a<i>". Only that last
// turn is a training turn, so counting judged turns gives t per source turn.

#pragma once

#include <string>
#include <vector>

#include "datamodel.hpp"
#include "llm_gateway.hpp"

namespace convsdg::aug {

inline constexpr int kDefaultRewrites = 2;
inline constexpr int kRewriteRetryBudget = 3;

struct AugmentationConfig {
  int t = kDefaultRewrites;
  llm::GenerationParams params;
  int retry_budget = kRewriteRetryBudget;
  int parallelism = 1;
};

struct RewriteResult {
  std::vector<std::string> rewrites;
  int degenerate = 0;   // rewrites identical to the input query
  int substituted = 0;  // empty completions replaced by the input query
};

RewriteResult rewrite_turn(const std::string& query, int t, llm::TextBackend& backend,
                           const llm::GenerationParams& params,
                           int retry_budget = kRewriteRetryBudget);

struct Dataset {
  std::vector<ConversationSession> sessions;
  Qrels qrels;
};

struct AugmentReport {
  int annotated_turns = 0;
  int skipped_turns = 0;
  int augmented_turns = 0;
  int degenerate_rewrites = 0;
  int substituted_rewrites = 0;
};

struct AugmentResult {
  Dataset augmented;
  AugmentReport report;
};

std::string augmented_id(const std::string& turn_id, int i);

// Requires manual qrels. Turns without judgments are skipped with a warning.
AugmentResult augment_dataset(const Dataset& original, const AugmentationConfig& cfg,
                              llm::TextBackend& backend);

// Originals first, then the augmented samples. Throws InvalidArgument when a
// session id, turn id or qrels query id occurs on both sides.
Dataset merge_datasets(const Dataset& original, const Dataset& augmented);

// Number of turns that have at least one judgment, i.e. usable training turns.
std::size_t count_judged_turns(const Dataset& data);

}  // namespace convsdg::aug
