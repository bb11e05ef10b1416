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

#include "dense_index.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "errors.hpp"

namespace convsdg::retrieval {
namespace {

void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw FormatError("truncated dense index file");
  return v;
}

bool ranks_before(const ScoredPassage& a, const ScoredPassage& b) {
  return a.score != b.score ? a.score > b.score : a.pid < b.pid;
}

}  // namespace

DenseIndex::DenseIndex(int dim, std::vector<std::string> pids, std::vector<float> matrix)
    : dim_(dim), pids_(std::move(pids)), matrix_(std::move(matrix)) {
  if (dim < 1) throw InvalidArgument("index dim must be >= 1");
  if (matrix_.size() != pids_.size() * static_cast<std::size_t>(dim))
    throw InvalidArgument("index matrix does not match count x dim");
  for (float x : matrix_)
    if (!std::isfinite(x)) throw InvalidArgument("index contains a non-finite value");
}

DenseIndex DenseIndex::build(const PassageCollection& collection,
                             const Encoder& passage_encoder) {
  if (passage_encoder.role() != EncoderRole::passage)
    throw InvalidArgument("dense index needs a passage-role encoder");
  const auto dim = static_cast<std::size_t>(passage_encoder.dim());
  std::vector<std::string> pids;
  std::vector<float> matrix;
  pids.reserve(collection.size());
  matrix.reserve(collection.size() * dim);
  for (const auto& p : collection.passages()) {
    auto v = passage_encoder.encode(p.text);
    pids.push_back(p.pid);
    for (double x : v) matrix.push_back(static_cast<float>(x));
  }
  return DenseIndex(passage_encoder.dim(), std::move(pids), std::move(matrix));
}

void DenseIndex::prepare_ann(const AnnParams& params) const {
  auto graph = std::make_shared<const HnswGraph>(matrix_, dim_, params);
  std::lock_guard lock(ann_->mu);
  ann_->graph = std::move(graph);
}

void DenseIndex::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  write_u32(out, static_cast<std::uint32_t>(dim_));
  write_u32(out, static_cast<std::uint32_t>(pids_.size()));
  out.write(reinterpret_cast<const char*>(matrix_.data()),
            static_cast<std::streamsize>(matrix_.size() * sizeof(float)));
  for (const auto& pid : pids_) {
    write_u32(out, static_cast<std::uint32_t>(pid.size()));
    out.write(pid.data(), static_cast<std::streamsize>(pid.size()));
  }
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

DenseIndex DenseIndex::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  const auto dim = read_u32(in);
  const auto count = read_u32(in);
  if (dim == 0 || dim > (1u << 16)) throw FormatError("dense index has implausible dim");
  std::vector<float> matrix(static_cast<std::size_t>(count) * dim);
  in.read(reinterpret_cast<char*>(matrix.data()),
          static_cast<std::streamsize>(matrix.size() * sizeof(float)));
  if (!in) throw FormatError("truncated dense index matrix");
  std::vector<std::string> pids(count);
  for (auto& pid : pids) {
    const auto len = read_u32(in);
    if (len > (1u << 20)) throw FormatError("dense index has a corrupt pid entry");
    pid.resize(len);
    in.read(pid.data(), len);
    if (!in) throw FormatError("truncated dense index pid list");
  }
  return DenseIndex(static_cast<int>(dim), std::move(pids), std::move(matrix));
}

double dot(std::span<const float> a, std::span<const float> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return acc;
}

std::vector<ScoredPassage> dense_search(std::span<const float> query, const DenseIndex& index,
                                        int k, SearchMode mode) {
  if (query.size() != static_cast<std::size_t>(index.dim()))
    throw InvalidArgument("query has " + std::to_string(query.size()) +
                          " dims, index has " + std::to_string(index.dim()));
  if (k < 1) throw InvalidArgument("k must be >= 1");
  const auto take = std::min<std::size_t>(static_cast<std::size_t>(k), index.size());
  std::vector<ScoredPassage> results;

  if (mode == SearchMode::exact) {
    results.reserve(index.size());
    for (std::size_t i = 0; i < index.size(); ++i)
      results.push_back({index.pids_[i], dot(query, index.row(i))});
    std::partial_sort(results.begin(), results.begin() + static_cast<std::ptrdiff_t>(take),
                      results.end(), ranks_before);
    results.resize(take);
    return results;
  }

  std::shared_ptr<const HnswGraph> graph;
  {
    std::lock_guard lock(index.ann_->mu);
    if (!index.ann_->graph)
      index.ann_->graph = std::make_shared<const HnswGraph>(index.matrix_, index.dim_, AnnParams{});
    graph = index.ann_->graph;
  }
  for (std::uint32_t id : graph->search(query, static_cast<int>(take)))
    results.push_back({index.pids_[id], dot(query, index.row(id))});
  sort_by_tiebreak(results);
  return results;
}

std::vector<float> to_float(const std::vector<double>& v) {
  return std::vector<float>(v.begin(), v.end());
}

}  // namespace convsdg::retrieval
