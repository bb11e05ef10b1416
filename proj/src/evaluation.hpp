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

// TREC-style effectiveness metrics. All of them depend on the order of the
// ranked list only, never on scores.

#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "datamodel.hpp"

namespace convsdg::eval {

// 1/rank of the first pid with grade >= rel_threshold over the whole list.
double reciprocal_rank(std::span<const std::string> ranked, const QueryJudgments& judged,
                       int rel_threshold = 1);

// Linear gain, log2(rank + 1) discount, ideal DCG from all judged grades
// (trec_eval ndcg_cut). 0 when no judged grade is positive.
double ndcg_at_k(std::span<const std::string> ranked, const QueryJudgments& judged, int k = 3);

double recall_at_k(std::span<const std::string> ranked, const QueryJudgments& judged, int k,
                   int rel_threshold = 1);

struct MetricSpec {
  enum class Kind { mrr, ndcg, recall } kind;
  int k = 0;  // unused for mrr
  std::string name;
};

// "mrr", "ndcg@<k>" or "recall@<k>"; throws InvalidArgument otherwise.
MetricSpec parse_metric(std::string_view name);
std::vector<MetricSpec> parse_metrics(std::string_view comma_separated);

struct EvaluationTable {
  std::vector<std::string> metric_names;
  // query id -> one value per metric, for every query in the qrels
  std::map<std::string, std::vector<double>> per_query;
  std::vector<double> means;

  std::vector<double> column(std::size_t metric) const;
};

// Macro average over the queries of the qrels. A query missing from the run
// scores 0 everywhere; run queries without judgments are ignored.
EvaluationTable evaluate_run(const RankedRun& run, const Qrels& qrels,
                             const std::vector<MetricSpec>& metrics, int rel_threshold = 1);

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
};

// Two-sided paired Student t-test on a - b. Differences with zero variance
// give p = 1 when their mean is 0 and p = 0 otherwise.
TTestResult paired_t_test(std::span<const double> a, std::span<const double> b);

}  // namespace convsdg::eval
