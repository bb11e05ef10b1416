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

#include <filesystem>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "datamodel.hpp"
#include "encoder.hpp"
#include "hnsw.hpp"

namespace convsdg::retrieval {

enum class SearchMode { exact, ann };

// Passage vectors, one row per pid; row i belongs to pids()[i].
class DenseIndex {
 public:
  DenseIndex(int dim, std::vector<std::string> pids, std::vector<float> matrix);

  // Throws InvalidArgument unless the encoder has the passage role.
  static DenseIndex build(const PassageCollection& collection, const Encoder& passage_encoder);

  int dim() const { return dim_; }
  std::size_t size() const { return pids_.size(); }
  const std::vector<std::string>& pids() const { return pids_; }
  std::span<const float> row(std::size_t i) const {
    return {matrix_.data() + i * static_cast<std::size_t>(dim_), static_cast<std::size_t>(dim_)};
  }
  std::span<const float> matrix() const { return matrix_; }

  // Builds the ANN graph now instead of on the first ann-mode search.
  void prepare_ann(const AnnParams& params = {}) const;

  // File layout (little-endian): u32 dim, u32 count, count*dim float32
  // row-major, then count pids, each as u32 byte length + bytes.
  void save(const std::filesystem::path& path) const;
  static DenseIndex load(const std::filesystem::path& path);

 private:
  friend std::vector<ScoredPassage> dense_search(std::span<const float> query,
                                                 const DenseIndex& index, int k,
                                                 SearchMode mode);

  int dim_;
  std::vector<std::string> pids_;
  std::vector<float> matrix_;
  struct AnnState {
    std::mutex mu;
    std::shared_ptr<const HnswGraph> graph;
  };
  std::shared_ptr<AnnState> ann_ = std::make_shared<AnnState>();
};

double dot(std::span<const float> a, std::span<const float> b);

// Exact mode returns the true top-k by dot product under the global
// tie-break. ANN mode re-scores the graph's candidates exactly, so scores are
// always true dot products. Throws InvalidArgument on a dimension mismatch.
std::vector<ScoredPassage> dense_search(std::span<const float> query, const DenseIndex& index,
                                        int k, SearchMode mode);

std::vector<float> to_float(const std::vector<double>& v);

}  // namespace convsdg::retrieval
