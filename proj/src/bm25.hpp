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

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "datamodel.hpp"

namespace convsdg::retrieval {

struct Bm25Params {
  double k1 = 0.9;
  double b = 0.4;
};

// idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5)), the Lucene form.
double bm25_idf(std::size_t doc_count, std::size_t df);

// Okapi BM25 of one passage. Every element of query_terms contributes, so a
// repeated term counts once per repetition. Throws InvalidArgument for an
// unknown pid.
double bm25_score(const std::vector<std::string>& query_terms, std::string_view pid,
                  const PassageCollection& collection, Bm25Params params = {});

// Inverted index over a collection. The collection must outlive the index.
class Bm25Index {
 public:
  explicit Bm25Index(const PassageCollection& collection, Bm25Params params = {});

  // Top-k passages sharing at least one term with the query, ordered by the
  // global tie-break. Throws InvalidArgument when k < 1 or the query has no
  // tokens.
  std::vector<ScoredPassage> search(std::string_view query, int k) const;

  const PassageCollection& collection() const { return *collection_; }
  Bm25Params params() const { return params_; }

 private:
  struct Posting {
    std::uint32_t doc;
    std::uint32_t tf;
  };
  const PassageCollection* collection_;
  Bm25Params params_;
  std::unordered_map<std::string, std::vector<Posting>> postings_;
};

inline std::vector<ScoredPassage> lexical_search(std::string_view query,
                                                 const Bm25Index& index, int k) {
  return index.search(query, k);
}

}  // namespace convsdg::retrieval
