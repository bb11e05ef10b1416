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

// Hierarchical navigable small-world graph for maximum inner product search.
//
// Inner product is reduced to Euclidean nearest neighbour by appending
// sqrt(M^2 - |x|^2) to every stored vector (M = largest norm) and 0 to the
// query: |q' - x'|^2 = |q|^2 + M^2 - 2 q.x, so the nearest augmented vector
// has the largest dot product.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace convsdg::retrieval {

struct AnnParams {
  int m = 24;                 // links per node above layer 0 (2m on layer 0)
  int ef_construction = 200;
  int ef_search = 200;
  std::uint64_t seed = 0x5eed;
};

class HnswGraph {
 public:
  // rows: count x dim row-major. Building is single-threaded and
  // deterministic for a given seed.
  HnswGraph(std::span<const float> rows, int dim, AnnParams params);

  // Candidate row ids, best first, at most k of them.
  std::vector<std::uint32_t> search(std::span<const float> query, int k) const;

 private:
  struct Candidate {
    float dist;
    std::uint32_t id;
  };
  struct Visited {
    std::vector<std::uint32_t> mark;
    std::uint32_t epoch = 0;
    void reset(std::size_t n);
    bool test_and_set(std::uint32_t id);
  };

  float distance(const float* a, const float* b) const;
  const float* vec(std::uint32_t id) const { return data_.data() + std::size_t(id) * stride_; }
  std::vector<Candidate> search_layer(const float* q, std::vector<Candidate> entry, int ef,
                                      int layer, Visited& visited) const;
  std::vector<std::uint32_t> select_neighbors(const float* base,
                                              std::vector<Candidate> candidates,
                                              int max_links) const;
  void insert(std::uint32_t id, int level);

  int stride_;
  AnnParams params_;
  std::vector<float> data_;
  std::vector<int> levels_;
  // links_[id][layer] = neighbour ids
  std::vector<std::vector<std::vector<std::uint32_t>>> links_;
  std::uint32_t entry_ = 0;
  int max_level_ = -1;
  Visited build_visited_;
};

}  // namespace convsdg::retrieval
