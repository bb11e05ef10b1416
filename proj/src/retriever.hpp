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

#include <string_view>
#include <vector>

#include "bm25.hpp"
#include "dense_index.hpp"
#include "encoder.hpp"

namespace convsdg::retrieval {

// Text in, ranked passages out. Implementations are read-only after
// construction and safe to share between threads.
class Retriever {
 public:
  virtual ~Retriever() = default;
  virtual std::vector<ScoredPassage> search(std::string_view query, int k) const = 0;
};

class LexicalRetriever final : public Retriever {
 public:
  explicit LexicalRetriever(const Bm25Index& index) : index_(&index) {}

  // A query without tokens yields no results rather than an error.
  std::vector<ScoredPassage> search(std::string_view query, int k) const override;

 private:
  const Bm25Index* index_;
};

class DenseRetriever final : public Retriever {
 public:
  DenseRetriever(const Encoder& query_encoder, const DenseIndex& index, SearchMode mode)
      : encoder_(&query_encoder), index_(&index), mode_(mode) {}

  std::vector<ScoredPassage> search(std::string_view query, int k) const override {
    return dense_search(to_float(encoder_->encode(query)), *index_, k, mode_);
  }

 private:
  const Encoder* encoder_;
  const DenseIndex* index_;
  SearchMode mode_;
};

}  // namespace convsdg::retrieval
