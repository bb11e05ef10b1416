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

#include "hnsw.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include "errors.hpp"
#include "text.hpp"

namespace convsdg::retrieval {
namespace {

struct Nearer {
  template <typename C>
  bool operator()(const C& a, const C& b) const {
    return a.dist != b.dist ? a.dist < b.dist : a.id < b.id;
  }
};

struct Farther {
  template <typename C>
  bool operator()(const C& a, const C& b) const {
    return Nearer{}(b, a);
  }
};

}  // namespace

void HnswGraph::Visited::reset(std::size_t n) {
  if (mark.size() < n) mark.resize(n, 0);
  if (++epoch == 0) {
    std::fill(mark.begin(), mark.end(), 0);
    epoch = 1;
  }
}

bool HnswGraph::Visited::test_and_set(std::uint32_t id) {
  if (mark[id] == epoch) return true;
  mark[id] = epoch;
  return false;
}

HnswGraph::HnswGraph(std::span<const float> rows, int dim, AnnParams params)
    : stride_(dim + 1), params_(params) {
  if (dim < 1) throw InvalidArgument("dim must be >= 1");
  if (params_.m < 2) throw InvalidArgument("ANN m must be >= 2");
  const std::size_t count = rows.size() / static_cast<std::size_t>(dim);

  double max_sq = 0.0;
  std::vector<double> sq(count, 0.0);
  for (std::size_t i = 0; i < count; ++i) {
    for (int d = 0; d < dim; ++d) {
      const double x = rows[i * dim + d];
      sq[i] += x * x;
    }
    max_sq = std::max(max_sq, sq[i]);
  }
  data_.resize(count * stride_);
  for (std::size_t i = 0; i < count; ++i) {
    std::copy_n(rows.begin() + static_cast<std::ptrdiff_t>(i * dim), dim,
                data_.begin() + static_cast<std::ptrdiff_t>(i * stride_));
    data_[i * stride_ + dim] = static_cast<float>(std::sqrt(std::max(0.0, max_sq - sq[i])));
  }

  Rng rng(params_.seed);
  const double ml = 1.0 / std::log(static_cast<double>(params_.m));
  levels_.resize(count);
  links_.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double u = 1.0 - rng.uniform();  // (0, 1]
    levels_[i] = static_cast<int>(std::floor(-std::log(u) * ml));
    links_[i].resize(static_cast<std::size_t>(levels_[i]) + 1);
    insert(static_cast<std::uint32_t>(i), levels_[i]);
  }
}

float HnswGraph::distance(const float* a, const float* b) const {
  float acc = 0.0f;
  for (int d = 0; d < stride_; ++d) {
    const float diff = a[d] - b[d];
    acc += diff * diff;
  }
  return acc;
}

std::vector<HnswGraph::Candidate> HnswGraph::search_layer(const float* q,
                                                          std::vector<Candidate> entry,
                                                          int ef, int layer,
                                                          Visited& visited) const {
  visited.reset(levels_.size());
  std::priority_queue<Candidate, std::vector<Candidate>, Farther> frontier;  // min-heap
  std::priority_queue<Candidate, std::vector<Candidate>, Nearer> best;       // max-heap
  for (const auto& e : entry) {
    if (visited.test_and_set(e.id)) continue;
    frontier.push(e);
    best.push(e);
  }
  while (best.size() > static_cast<std::size_t>(ef)) best.pop();

  while (!frontier.empty()) {
    const Candidate c = frontier.top();
    if (best.size() >= static_cast<std::size_t>(ef) && c.dist > best.top().dist) break;
    frontier.pop();
    for (std::uint32_t nb : links_[c.id][static_cast<std::size_t>(layer)]) {
      if (visited.test_and_set(nb)) continue;
      const float d = distance(q, vec(nb));
      if (best.size() < static_cast<std::size_t>(ef) || d < best.top().dist) {
        frontier.push({d, nb});
        best.push({d, nb});
        if (best.size() > static_cast<std::size_t>(ef)) best.pop();
      }
    }
  }
  std::vector<Candidate> out;
  out.reserve(best.size());
  while (!best.empty()) {
    out.push_back(best.top());
    best.pop();
  }
  std::reverse(out.begin(), out.end());
  return out;
}

std::vector<std::uint32_t> HnswGraph::select_neighbors(const float* /*base*/,
                                                       std::vector<Candidate> candidates,
                                                       int max_links) const {
  // Keep a candidate only if it is closer to the base than to every
  // neighbour already kept; this spreads links across directions.
  std::sort(candidates.begin(), candidates.end(), Nearer{});
  std::vector<std::uint32_t> kept;
  for (const auto& c : candidates) {
    if (static_cast<int>(kept.size()) >= max_links) break;
    bool diverse = true;
    for (std::uint32_t k : kept) {
      if (distance(vec(c.id), vec(k)) < c.dist) {
        diverse = false;
        break;
      }
    }
    if (diverse) kept.push_back(c.id);
  }
  return kept;
}

void HnswGraph::insert(std::uint32_t id, int level) {
  const float* q = vec(id);
  if (max_level_ < 0) {
    entry_ = id;
    max_level_ = level;
    return;
  }
  Candidate ep{distance(q, vec(entry_)), entry_};
  for (int l = max_level_; l > level; --l)
    ep = search_layer(q, {ep}, 1, l, build_visited_).front();

  std::vector<Candidate> eps{ep};
  for (int l = std::min(level, max_level_); l >= 0; --l) {
    auto found = search_layer(q, eps, params_.ef_construction, l, build_visited_);
    const auto layer = static_cast<std::size_t>(l);
    const int cap = l == 0 ? 2 * params_.m : params_.m;
    links_[id][layer] = select_neighbors(q, found, params_.m);
    for (std::uint32_t nb : links_[id][layer]) {
      auto& back = links_[nb][layer];
      back.push_back(id);
      if (static_cast<int>(back.size()) > cap) {
        std::vector<Candidate> cands;
        cands.reserve(back.size());
        for (std::uint32_t x : back) cands.push_back({distance(vec(nb), vec(x)), x});
        back = select_neighbors(vec(nb), std::move(cands), cap);
      }
    }
    eps = std::move(found);
  }
  if (level > max_level_) {
    entry_ = id;
    max_level_ = level;
  }
}

std::vector<std::uint32_t> HnswGraph::search(std::span<const float> query, int k) const {
  if (levels_.empty() || k < 1) return {};
  std::vector<float> q(static_cast<std::size_t>(stride_), 0.0f);
  std::copy_n(query.begin(), std::min<std::size_t>(query.size(), q.size() - 1), q.begin());

  Visited visited;
  Candidate ep{distance(q.data(), vec(entry_)), entry_};
  for (int l = max_level_; l > 0; --l)
    ep = search_layer(q.data(), {ep}, 1, l, visited).front();
  auto found = search_layer(q.data(), {ep}, std::max(params_.ef_search, k), 0, visited);
  std::vector<std::uint32_t> ids;
  for (std::size_t i = 0; i < found.size() && ids.size() < static_cast<std::size_t>(k); ++i)
    ids.push_back(found[i].id);
  return ids;
}

}  // namespace convsdg::retrieval
