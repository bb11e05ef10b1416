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

#include "training.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include "errors.hpp"
#include "text.hpp"

namespace convsdg::train {
namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace

std::string reformulate_query(const ConversationSession& session, int n, int max_concat_len) {
  if (n < 1 || n > static_cast<int>(session.turns.size()))
    throw InvalidArgument("turn " + std::to_string(n) + " out of range");
  const auto last = static_cast<std::size_t>(n) - 1;
  std::vector<std::size_t> lengths(last + 1);
  std::size_t total = 0;
  for (std::size_t i = 0; i <= last; ++i) {
    lengths[i] = tokenize(session.turns[i].query).size();
    total += lengths[i];
  }
  std::size_t first = 0;
  const auto limit = static_cast<std::size_t>(std::max(max_concat_len, 1));
  while (total > limit && first < last) total -= lengths[first++];

  if (total > limit) {
    auto tokens = tokenize(session.turns[last].query);
    tokens.erase(tokens.begin(), tokens.end() - static_cast<std::ptrdiff_t>(limit));
    return join(tokens, " ");
  }
  std::vector<std::string> parts;
  for (std::size_t i = first; i <= last; ++i) parts.push_back(session.turns[i].query);
  return join(parts, " ");
}

LossResult contrastive_loss(std::span<const double> query, std::span<const double> positive,
                            const std::vector<std::vector<double>>& negatives) {
  if (negatives.empty())
    throw InvalidArgument("contrastive loss needs at least one negative");
  if (positive.size() != query.size())
    throw InvalidArgument("positive and query dimensions differ");
  for (const auto& n : negatives)
    if (n.size() != query.size()) throw InvalidArgument("negative and query dimensions differ");

  std::vector<double> scores;
  scores.reserve(negatives.size() + 1);
  scores.push_back(dot(query, positive));
  for (const auto& n : negatives) scores.push_back(dot(query, n));
  const double top = *std::max_element(scores.begin(), scores.end());
  double z = 0.0;
  for (double s : scores) z += std::exp(s - top);
  const double log_z = top + std::log(z);

  LossResult r;
  r.loss = log_z - scores[0];
  // d/dq = sum_j softmax_j * v_j - positive
  r.grad_query.assign(query.size(), 0.0);
  for (std::size_t j = 0; j < scores.size(); ++j) {
    const double w = std::exp(scores[j] - log_z);
    const auto& v = j == 0 ? positive : std::span<const double>(negatives[j - 1]);
    for (std::size_t d = 0; d < query.size(); ++d) r.grad_query[d] += w * v[d];
  }
  for (std::size_t d = 0; d < query.size(); ++d) r.grad_query[d] -= positive[d];
  return r;
}

std::vector<TrainingExample> build_training_examples(
    const std::vector<ConversationSession>& sessions, const Qrels& qrels,
    int max_concat_len, int rel_threshold) {
  std::vector<TrainingExample> out;
  for (const auto& s : sessions) {
    for (std::size_t i = 0; i < s.turns.size(); ++i) {
      const auto* judged = qrels.find(s.turns[i].turn_id);
      if (judged == nullptr) continue;
      TrainingExample ex;
      ex.query_id = s.turns[i].turn_id;
      for (const auto& [pid, grade] : *judged)
        if (grade >= rel_threshold) ex.positive_pids.push_back(pid);
      if (ex.positive_pids.empty()) continue;
      ex.reformulated_query = reformulate_query(s, static_cast<int>(i) + 1, max_concat_len);
      out.push_back(std::move(ex));
    }
  }
  return out;
}

BatchPlan make_batches(const std::vector<TrainingExample>& examples, const TrainConfig& cfg) {
  if (cfg.batch_size < 2)
    throw InvalidArgument("in-batch negatives need batch_size >= 2");
  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng shuffler(mix_seed(cfg.seed, 0xba7c5ULL));
  shuffler.shuffle(order);

  std::vector<std::string> picked(examples.size());
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto& pos = examples[i].positive_pids;
    if (pos.empty())
      throw InvalidArgument("example '" + examples[i].query_id + "' has no positive");
    Rng pick(mix_seed(cfg.seed, fnv1a64(examples[i].query_id)));
    picked[i] = pos[static_cast<std::size_t>(pick.below(pos.size()))];
  }

  BatchPlan plan;
  const auto size = static_cast<std::size_t>(cfg.batch_size);
  for (std::size_t start = 0; start < order.size(); start += size) {
    const std::size_t end = std::min(order.size(), start + size);
    if (end - start < 2) {
      std::cerr << "warning: dropping a trailing batch of one example ('"
                << examples[order[start]].query_id << "')\n";
      plan.dropped_examples += end - start;
      continue;
    }
    Batch batch;
    for (std::size_t a = start; a < end; ++a) {
      const auto& ex = examples[order[a]];
      const std::set<std::string> own(ex.positive_pids.begin(), ex.positive_pids.end());
      BatchItem item{ex, picked[order[a]]};
      item.example.negative_pids.clear();
      for (std::size_t b = start; b < end; ++b) {
        if (b == a) continue;
        const auto& neg = picked[order[b]];
        if (own.count(neg)) {
          ++plan.collisions;
          continue;
        }
        item.example.negative_pids.push_back(neg);
      }
      batch.push_back(std::move(item));
    }
    plan.batches.push_back(std::move(batch));
  }
  return plan;
}

TrainingReport train(const std::vector<TrainingExample>& examples,
                     retrieval::HashedProjectionEncoder& query_encoder,
                     const retrieval::Encoder& passage_encoder,
                     const PassageCollection& collection, const TrainConfig& cfg) {
  if (query_encoder.role() != retrieval::EncoderRole::query)
    throw InvalidArgument("train needs a query-role encoder to update");
  if (passage_encoder.dim() != query_encoder.dim())
    throw InvalidArgument("query and passage encoders have different dims");
  if (cfg.epochs < 1) throw InvalidArgument("epochs must be >= 1");
  if (!(cfg.learning_rate >= 0.0)) throw InvalidArgument("learning rate must be >= 0");

  const auto plan = make_batches(examples, cfg);
  TrainingReport report;
  report.collisions = plan.collisions;
  report.dropped_examples = plan.dropped_examples;

  // Frozen encoder: every passage vector can be computed once.
  std::unordered_map<std::string, std::vector<double>> passage_vecs;
  auto passage_vec = [&](const std::string& pid) -> const std::vector<double>& {
    auto it = passage_vecs.find(pid);
    if (it != passage_vecs.end()) return it->second;
    const auto* p = collection.find(pid);
    if (p == nullptr) throw InvalidArgument("positive pid '" + pid + "' not in the collection");
    return passage_vecs.emplace(pid, passage_encoder.encode(p->text)).first->second;
  };
  std::vector<std::vector<retrieval::SparseFeatures>> features(plan.batches.size());
  for (std::size_t b = 0; b < plan.batches.size(); ++b) {
    for (const auto& item : plan.batches[b]) {
      features[b].push_back(query_encoder.features(item.example.reformulated_query));
      passage_vec(item.positive);
      for (const auto& n : item.example.negative_pids) passage_vec(n);
      ++report.examples_used;
    }
  }

  const auto dim = static_cast<std::size_t>(query_encoder.dim());
  const auto hw = static_cast<std::size_t>(query_encoder.hash_width());
  auto weights = query_encoder.mutable_weights();
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    for (std::size_t b = 0; b < plan.batches.size(); ++b) {
      const auto& batch = plan.batches[b];
      std::map<std::uint32_t, std::vector<double>> grad;  // bucket -> d loss / d W[:, bucket]
      std::size_t used = 0;
      for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto& item = batch[i];
        if (item.example.negative_pids.empty()) {
          if (epoch == 1) ++report.skipped_items;
          continue;
        }
        const auto q = query_encoder.project(features[b][i]);
        std::vector<std::vector<double>> negs;
        negs.reserve(item.example.negative_pids.size());
        for (const auto& n : item.example.negative_pids) negs.push_back(passage_vecs.at(n));
        auto r = contrastive_loss(q, passage_vecs.at(item.positive), negs);
        if (!std::isfinite(r.loss)) {
          std::ostringstream msg;
          msg << "non-finite loss at epoch " << epoch << ", batch " << b << ", example '"
              << item.example.query_id << "' (lr=" << cfg.learning_rate << ")";
          throw TrainingDiverged(msg.str());
        }
        loss_sum += r.loss;
        ++loss_count;
        ++used;
        for (const auto& [bucket, count] : features[b][i]) {
          auto& g = grad[bucket];
          if (g.empty()) g.assign(dim, 0.0);
          for (std::size_t d = 0; d < dim; ++d) g[d] += r.grad_query[d] * count;
        }
      }
      if (used == 0) continue;
      const double step = cfg.learning_rate / static_cast<double>(used);
      for (const auto& [bucket, g] : grad)
        for (std::size_t d = 0; d < dim; ++d) {
          auto& w = weights[d * hw + bucket];
          w = static_cast<float>(static_cast<double>(w) - step * g[d]);
        }
      ++report.steps;
    }
    report.epoch_mean_loss.push_back(loss_count ? loss_sum / static_cast<double>(loss_count) : 0.0);
  }
  return report;
}

}  // namespace convsdg::train
