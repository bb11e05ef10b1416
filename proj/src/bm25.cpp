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

#include "bm25.hpp"
#include "retriever.hpp"

#include <algorithm>
#include <cmath>

#include "errors.hpp"
#include "text.hpp"

namespace convsdg::retrieval {
namespace {

double term_weight(double idf, double tf, double dl, double avgdl, Bm25Params p) {
  const double norm = avgdl > 0.0 ? dl / avgdl : 0.0;
  return idf * tf * (p.k1 + 1.0) / (tf + p.k1 * (1.0 - p.b + p.b * norm));
}

}  // namespace

double bm25_idf(std::size_t doc_count, std::size_t df) {
  const double n = static_cast<double>(doc_count);
  const double d = static_cast<double>(df);
  return std::log(1.0 + (n - d + 0.5) / (d + 0.5));
}

double bm25_score(const std::vector<std::string>& query_terms, std::string_view pid,
                  const PassageCollection& collection, Bm25Params params) {
  auto idx = collection.index_of(pid);
  if (!idx) throw InvalidArgument("unknown pid '" + std::string(pid) + "'");
  const auto& stats = collection.stats();
  const auto& tf = collection.term_freqs(*idx);
  const double dl = static_cast<double>(collection.doc_length(*idx));
  double score = 0.0;
  for (const auto& term : query_terms) {
    auto it = tf.find(term);
    if (it == tf.end()) continue;
    const double idf = bm25_idf(stats.doc_count, stats.df.at(term));
    score += term_weight(idf, it->second, dl, stats.avg_doc_len, params);
  }
  return score;
}

Bm25Index::Bm25Index(const PassageCollection& collection, Bm25Params params)
    : collection_(&collection), params_(params) {
  for (std::size_t i = 0; i < collection.size(); ++i)
    for (const auto& [term, tf] : collection.term_freqs(i))
      postings_[term].push_back({static_cast<std::uint32_t>(i), tf});
  for (auto& [_, list] : postings_)
    std::sort(list.begin(), list.end(),
              [](const Posting& a, const Posting& b) { return a.doc < b.doc; });
}

std::vector<ScoredPassage> Bm25Index::search(std::string_view query, int k) const {
  if (k < 1) throw InvalidArgument("k must be >= 1");
  const auto terms = tokenize(query);
  if (terms.empty()) throw InvalidArgument("query has no tokens");
  const auto& stats = collection_->stats();

  // Accumulate in query-term order so sums match bm25_score bit for bit.
  std::unordered_map<std::uint32_t, double> acc;
  for (const auto& term : terms) {
    auto it = postings_.find(term);
    if (it == postings_.end()) continue;
    const double idf = bm25_idf(stats.doc_count, it->second.size());
    for (const auto& p : it->second) {
      const double dl = static_cast<double>(collection_->doc_length(p.doc));
      acc[p.doc] += term_weight(idf, p.tf, dl, stats.avg_doc_len, params_);
    }
  }
  std::vector<ScoredPassage> results;
  results.reserve(acc.size());
  for (const auto& [doc, score] : acc) results.push_back({collection_->at(doc).pid, score});
  sort_by_tiebreak(results);
  if (results.size() > static_cast<std::size_t>(k)) results.resize(static_cast<std::size_t>(k));
  return results;
}

std::vector<ScoredPassage> LexicalRetriever::search(std::string_view query, int k) const {
  if (tokenize(query).empty()) return {};
  return index_->search(query, k);
}

}  // namespace convsdg::retrieval
