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

// Conversational dense retrieval fine-tuning. The query is the concatenation
// of all session queries up to the current turn; the passage encoder stays
// frozen and only the query encoder's projection is updated.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "datamodel.hpp"
#include "encoder.hpp"

namespace convsdg::train {

enum class NegativeStrategy { in_batch };

struct TrainConfig {
  int batch_size = 16;
  int epochs = 5;
  double learning_rate = 1e-5;
  std::uint64_t seed = 0;
  NegativeStrategy negatives = NegativeStrategy::in_batch;
  int max_concat_len = retrieval::kSessionMaxLen;
};

// q_1 .. q_n joined by single spaces. When the token count exceeds
// max_concat_len whole turns are dropped from the front; q_n is kept, and if
// it alone is too long only its last max_concat_len tokens remain.
std::string reformulate_query(const ConversationSession& session, int n, int max_concat_len);

struct LossResult {
  double loss = 0.0;
  std::vector<double> grad_query;  // d loss / d q
};

// -log softmax of the positive score among {positive} + negatives, with
// dot-product scores. Throws InvalidArgument on an empty negative set or a
// dimension mismatch.
LossResult contrastive_loss(std::span<const double> query, std::span<const double> positive,
                            const std::vector<std::vector<double>>& negatives);

struct TrainingExample {
  std::string query_id;
  std::string reformulated_query;
  std::vector<std::string> positive_pids;
  std::vector<std::string> negative_pids;
};

// One example per judged turn (grade >= rel_threshold), in session order.
std::vector<TrainingExample> build_training_examples(
    const std::vector<ConversationSession>& sessions, const Qrels& qrels,
    int max_concat_len, int rel_threshold = 1);

struct BatchItem {
  TrainingExample example;  // negative_pids filled from the batch
  std::string positive;
};
using Batch = std::vector<BatchItem>;

struct BatchPlan {
  std::vector<Batch> batches;
  // In-batch negatives removed because they are positives of the example.
  std::size_t collisions = 0;
  std::size_t dropped_examples = 0;
};

// Shuffles once by cfg.seed and picks one positive per example. Negatives
// of an item are the picked positives of the other items in its batch. A
// trailing batch of one example cannot form negatives and is dropped.
BatchPlan make_batches(const std::vector<TrainingExample>& examples, const TrainConfig& cfg);

struct TrainingReport {
  std::vector<double> epoch_mean_loss;
  std::size_t steps = 0;
  std::size_t examples_used = 0;
  std::size_t collisions = 0;
  std::size_t dropped_examples = 0;
  std::size_t skipped_items = 0;  // items left without any negative
};

// Plain SGD on the query encoder's projection matrix. The passage encoder is
// only read. Throws TrainingDiverged on a non-finite loss.
TrainingReport train(const std::vector<TrainingExample>& examples,
                     retrieval::HashedProjectionEncoder& query_encoder,
                     const retrieval::Encoder& passage_encoder,
                     const PassageCollection& collection, const TrainConfig& cfg);

}  // namespace convsdg::train
