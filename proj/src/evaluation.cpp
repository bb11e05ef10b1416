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

#include "evaluation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>

#include <boost/math/distributions/students_t.hpp>

#include "errors.hpp"
#include "text.hpp"

namespace convsdg::eval {
namespace {

int grade_of(const QueryJudgments& judged, const std::string& pid) {
  auto it = judged.find(pid);
  return it == judged.end() ? 0 : it->second;
}

}  // namespace

double reciprocal_rank(std::span<const std::string> ranked, const QueryJudgments& judged,
                       int rel_threshold) {
  for (std::size_t i = 0; i < ranked.size(); ++i)
    if (grade_of(judged, ranked[i]) >= rel_threshold) return 1.0 / static_cast<double>(i + 1);
  return 0.0;
}

double ndcg_at_k(std::span<const std::string> ranked, const QueryJudgments& judged, int k) {
  if (k < 1) throw InvalidArgument("ndcg cutoff must be >= 1");
  const auto cut = static_cast<std::size_t>(k);
  double dcg = 0.0;
  for (std::size_t i = 0; i < std::min(cut, ranked.size()); ++i) {
    const int g = grade_of(judged, ranked[i]);
    if (g > 0) dcg += g / std::log2(static_cast<double>(i) + 2.0);
  }
  std::vector<int> ideal;
  for (const auto& [_, g] : judged)
    if (g > 0) ideal.push_back(g);
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  double idcg = 0.0;
  for (std::size_t i = 0; i < std::min(cut, ideal.size()); ++i)
    idcg += ideal[i] / std::log2(static_cast<double>(i) + 2.0);
  return idcg > 0.0 ? dcg / idcg : 0.0;
}

double recall_at_k(std::span<const std::string> ranked, const QueryJudgments& judged, int k,
                   int rel_threshold) {
  if (k < 1) throw InvalidArgument("recall cutoff must be >= 1");
  std::size_t relevant = 0;
  for (const auto& [_, g] : judged)
    if (g >= rel_threshold) ++relevant;
  if (relevant == 0) return 0.0;
  std::size_t found = 0;
  for (std::size_t i = 0; i < std::min(static_cast<std::size_t>(k), ranked.size()); ++i)
    if (grade_of(judged, ranked[i]) >= rel_threshold) ++found;
  return static_cast<double>(found) / static_cast<double>(relevant);
}

MetricSpec parse_metric(std::string_view raw) {
  const auto name = to_lower(trim(raw));
  if (name == "mrr") return {MetricSpec::Kind::mrr, 0, name};
  auto at = name.find('@');
  if (at != std::string::npos) {
    const auto base = name.substr(0, at);
    int k = 0;
    const auto digits = std::string_view(name).substr(at + 1);
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), k);
    if (ec == std::errc() && ptr == digits.data() + digits.size() && k >= 1) {
      if (base == "ndcg") return {MetricSpec::Kind::ndcg, k, name};
      if (base == "recall") return {MetricSpec::Kind::recall, k, name};
    }
  }
  throw InvalidArgument("unknown metric '" + std::string(raw) +
                        "' (expected mrr, ndcg@k or recall@k)");
}

std::vector<MetricSpec> parse_metrics(std::string_view comma_separated) {
  std::vector<MetricSpec> out;
  for (const auto& part : split(comma_separated, ','))
    if (!trim(part).empty()) out.push_back(parse_metric(part));
  if (out.empty()) throw InvalidArgument("no metrics requested");
  return out;
}

std::vector<double> EvaluationTable::column(std::size_t metric) const {
  std::vector<double> out;
  out.reserve(per_query.size());
  for (const auto& [_, values] : per_query) out.push_back(values.at(metric));
  return out;
}

EvaluationTable evaluate_run(const RankedRun& run, const Qrels& qrels,
                             const std::vector<MetricSpec>& metrics, int rel_threshold) {
  EvaluationTable table;
  for (const auto& m : metrics) table.metric_names.push_back(m.name);
  table.means.assign(metrics.size(), 0.0);
  for (const auto& [qid, judged] : qrels.by_query) {
    const auto ranked = run.ranked_pids(qid);
    std::vector<double> row;
    for (const auto& m : metrics) {
      switch (m.kind) {
        case MetricSpec::Kind::mrr:
          row.push_back(reciprocal_rank(ranked, judged, rel_threshold));
          break;
        case MetricSpec::Kind::ndcg:
          row.push_back(ndcg_at_k(ranked, judged, m.k));
          break;
        case MetricSpec::Kind::recall:
          row.push_back(recall_at_k(ranked, judged, m.k, rel_threshold));
          break;
      }
    }
    for (std::size_t i = 0; i < row.size(); ++i) table.means[i] += row[i];
    table.per_query.emplace(qid, std::move(row));
  }
  if (!table.per_query.empty())
    for (auto& m : table.means) m /= static_cast<double>(table.per_query.size());
  return table;
}

TTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw InvalidArgument("paired t-test needs equal-length samples");
  if (a.size() < 2) throw InvalidArgument("paired t-test needs at least two pairs");
  const auto n = static_cast<double>(a.size());
  double mean = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) mean += a[i] - b[i];
  mean /= n;
  double ss = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i] - mean;
    ss += d * d;
  }
  const double var = ss / (n - 1.0);
  // Relative tolerance: differences such as 0.2-0.1 vs 0.4-0.3 are not
  // bit-identical in binary floating point.
  double scale = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    scale = std::max({scale, std::abs(a[i]), std::abs(b[i])});
  const double eps = 1e-12 * std::max(scale, 1.0);
  if (std::sqrt(var) <= eps) {
    if (std::abs(mean) <= eps) return {0.0, 1.0};
    return {mean > 0 ? std::numeric_limits<double>::infinity()
                     : -std::numeric_limits<double>::infinity(),
            0.0};
  }
  const double t = mean / std::sqrt(var / n);
  boost::math::students_t dist(n - 1.0);
  const double p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
  return {t, std::min(1.0, p)};
}

}  // namespace convsdg::eval
