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

// Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any
// failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "../unit/support.hpp"
#include "bm25.hpp"
#include "dense_index.hpp"
#include "encoder.hpp"
#include "evaluation.hpp"
#include "llm_gateway.hpp"
#include "pipeline.hpp"
#include "query_aug.hpp"
#include "retriever.hpp"
#include "supervision.hpp"
#include "synthetic.hpp"
#include "text.hpp"
#include "training.hpp"

using namespace convsdg;
using Json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;
};

class Checker {
 public:
  void run(const std::string& name, double budget_seconds, const std::function<Outcome()>& body) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = body();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (secs > budget_seconds) {
      out.ok = false;
      out.detail += " (over the " + std::to_string(budget_seconds) + " s budget)";
    }
    std::printf("%s  %-28s %7.2fs  %s\n", out.ok ? "PASS" : "FAIL", name.c_str(), secs,
                out.detail.c_str());
    std::fflush(stdout);
    failures_ += out.ok ? 0 : 1;
  }
  int failures() const { return failures_; }

 private:
  int failures_ = 0;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Outcome metric_oracle() {
  std::ifstream in(testing::data_dir() / "metric_oracle.json");
  const auto cases = Json::parse(in);
  double worst = 0.0;
  std::size_t checked = 0;
  for (const auto& c : cases) {
    for (const auto& [qid, expected] : c["expected"].items()) {
      const auto ranked = c["run"][qid].get<std::vector<std::string>>();
      QueryJudgments judged;
      for (const auto& [pid, grade] : c["qrels"][qid].items()) judged[pid] = grade.get<int>();
      worst = std::max({worst,
                        std::abs(eval::reciprocal_rank(ranked, judged) - expected["mrr"].get<double>()),
                        std::abs(eval::ndcg_at_k(ranked, judged, 3) - expected["ndcg@3"].get<double>()),
                        std::abs(eval::recall_at_k(ranked, judged, 100) -
                                 expected["recall@100"].get<double>())});
      ++checked;
    }
  }
  return {checked > 0 && worst <= 1e-6,
          std::to_string(checked) + " queries, max abs error " + fmt("%.3g", worst)};
}

Outcome gradient_check() {
  Rng rng(101);
  auto vec = [&](std::size_t d) {
    std::vector<double> v(d);
    for (auto& x : v) x = rng.uniform() * 2 - 1;
    return v;
  };
  double worst = 0.0;
  for (int inst = 0; inst < 100; ++inst) {
    const std::size_t d = 4 + rng.below(29);
    auto q = vec(d);
    const auto p = vec(d);
    std::vector<std::vector<double>> negs;
    const auto n = 1 + rng.below(15);
    for (std::uint64_t i = 0; i < n; ++i) negs.push_back(vec(d));
    const auto res = train::contrastive_loss(q, p, negs);
    double diff = 0.0, norm_a = 0.0, norm_b = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double h = 1e-5;
      auto plus = q, minus = q;
      plus[i] += h;
      minus[i] -= h;
      const double fd = (train::contrastive_loss(plus, p, negs).loss -
                         train::contrastive_loss(minus, p, negs).loss) /
                        (2 * h);
      diff += (res.grad_query[i] - fd) * (res.grad_query[i] - fd);
      norm_a += res.grad_query[i] * res.grad_query[i];
      norm_b += fd * fd;
    }
    const double rel = std::sqrt(diff) / std::max({std::sqrt(norm_a), std::sqrt(norm_b), 1e-12});
    worst = std::max(worst, rel);
  }
  return {worst < 1e-4, "100 instances, max relative error " + fmt("%.3g", worst)};
}

std::vector<float> random_rows(Rng& rng, std::size_t rows, int dim) {
  std::vector<float> m(rows * static_cast<std::size_t>(dim));
  for (auto& x : m) x = static_cast<float>(rng.uniform() * 2 - 1);
  return m;
}

std::vector<std::string> pid_list(std::size_t n) {
  std::vector<std::string> pids;
  for (std::size_t i = 0; i < n; ++i) pids.push_back("p" + std::to_string(i));
  return pids;
}

std::vector<ScoredPassage> full_sort(std::span<const float> q, const retrieval::DenseIndex& idx) {
  std::vector<ScoredPassage> all;
  for (std::size_t i = 0; i < idx.size(); ++i)
    all.push_back({idx.pids()[i], retrieval::dot(q, idx.row(i))});
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    return a.score != b.score ? a.score > b.score : a.pid < b.pid;
  });
  return all;
}

Outcome dense_search_checks() {
  const int dim = 64;
  Rng rng(202);
  const retrieval::DenseIndex small(dim, pid_list(1000), random_rows(rng, 1000, dim));
  int mismatches = 0;
  for (int q = 0; q < 50; ++q) {
    const auto query = random_rows(rng, 1, dim);
    auto truth = full_sort(query, small);
    truth.resize(100);
    const auto got = retrieval::dense_search(query, small, 100, retrieval::SearchMode::exact);
    bool same = got.size() == truth.size();
    for (std::size_t i = 0; same && i < got.size(); ++i) same = got[i].pid == truth[i].pid;
    mismatches += same ? 0 : 1;
  }

  const retrieval::DenseIndex big(dim, pid_list(10000), random_rows(rng, 10000, dim));
  big.prepare_ann();
  double found = 0.0;
  const int queries = 100;
  for (int q = 0; q < queries; ++q) {
    const auto query = random_rows(rng, 1, dim);
    const auto truth = full_sort(query, big);
    std::set<std::string> top;
    for (std::size_t i = 0; i < 10; ++i) top.insert(truth[i].pid);
    for (const auto& h : retrieval::dense_search(query, big, 10, retrieval::SearchMode::ann))
      found += static_cast<double>(top.count(h.pid));
  }
  const double recall = found / (10.0 * queries);
  return {mismatches == 0 && recall >= 0.9,
          "exact mismatches " + std::to_string(mismatches) + "/50, ann recall@10 " +
              fmt("%.4f", recall)};
}

Outcome augmentation_counts() {
  aug::Dataset data;
  for (int s = 0; s < 149; ++s) {
    ConversationSession session;
    session.session_id = "S" + std::to_string(s);
    session.topic = {"T" + std::to_string(s % 7), "topic", "a topic about things"};
    for (int t = 1; t <= 5; ++t) {
      QueryTurn turn;
      turn.ordinal = t;
      turn.turn_id = default_turn_id(session.session_id, t);
      turn.query = "question " + std::to_string(t) + " about item " + std::to_string(s);
      data.qrels.add(turn.turn_id, "d" + std::to_string(s) + "_" + std::to_string(t), 1 + t % 3);
      data.qrels.add(turn.turn_id, "x" + std::to_string(s), 0);
      session.turns.push_back(turn);
    }
    data.sessions.push_back(session);
  }
  llm::MockBackend mock;
  aug::AugmentationConfig cfg;
  cfg.t = 2;
  const auto result = aug::augment_dataset(data, cfg, mock);
  const auto merged = aug::merge_datasets(data, result.augmented);
  const auto original = aug::count_judged_turns(data);
  const auto augmented = aug::count_judged_turns(result.augmented);
  const auto total = aug::count_judged_turns(merged);

  int wrong = 0;
  for (const auto& [qid, judged] : data.qrels.by_query)
    for (int i = 1; i <= 2; ++i) {
      const auto* a = result.augmented.qrels.find(aug::augmented_id(qid, i));
      if (a == nullptr || *a != judged) ++wrong;
    }
  return {original == 745 && augmented == 1490 && total == 2235 && wrong == 0,
          "original " + std::to_string(original) + ", augmented " + std::to_string(augmented) +
              ", merged " + std::to_string(total) + ", propagation errors " +
              std::to_string(wrong)};
}

Outcome end_to_end(const fs::path& root) {
  auto json = pipeline::load_config_file(pipeline::make_fixture(root / "e2e", 2024));
  const auto cfg = pipeline::parse_config(json);
  pipeline::run_pipeline(cfg, false);
  std::ifstream in(cfg.workspace / "report.json");
  const auto report = Json::parse(in);
  const double tuned = report["fine_tuned"]["mrr"].get<double>();
  const double zero = report["zero_shot"]["mrr"].get<double>();
  const double gain = (tuned - zero) / zero;
  return {gain >= 0.20, "zero-shot MRR " + fmt("%.4f", zero) + ", fine-tuned " +
                            fmt("%.4f", tuned) + ", gain " + fmt("%+.1f%%", 100 * gain)};
}

Outcome prf_checks() {
  const auto fx = synthetic::make_desk_fixture();
  const retrieval::Bm25Index index(fx.collection);
  const retrieval::LexicalRetriever retriever(index);
  std::vector<ConversationSession> sessions = fx.eval.sessions;
  for (auto& s : sessions)
    for (auto& t : s.turns) t.answer = "an answer about " + t.query;
  prf::PrfConfig cfg;
  cfg.seed = 99;
  const auto a = prf::assign_pseudo_labels(sessions, retriever, cfg);
  const auto b = prf::assign_pseudo_labels(sessions, retriever, cfg);
  int outside = 0;
  std::size_t labeled = 0;
  for (const auto& s : sessions)
    for (std::size_t i = 0; i < s.turns.size(); ++i) {
      const auto* judged = a.qrels.find(s.turns[i].turn_id);
      if (judged == nullptr) continue;
      const auto top = retriever.search(prf::build_query_form(s, static_cast<int>(i) + 1, cfg.form), 5);
      for (const auto& [pid, grade] : *judged) {
        ++labeled;
        const bool in_top = std::any_of(top.begin(), top.end(), [&](const auto& h) { return h.pid == pid; });
        if (!in_top || grade != 1) ++outside;
      }
    }

  std::vector<ScoredPassage> cands;
  for (int i = 1; i <= 5; ++i) cands.push_back({"d" + std::to_string(i), 1.0});
  std::map<std::vector<std::string>, int> counts;
  const int draws = 10000;
  for (int s = 0; s < draws; ++s) {
    auto pick = prf::sample_pseudo_positives(cands, 3, static_cast<std::uint64_t>(s), "turn");
    std::sort(pick.begin(), pick.end());
    ++counts[pick];
  }
  const double expect = draws / 10.0;
  const double sigma = std::sqrt(draws * 0.1 * 0.9);
  double worst = 0.0;
  for (const auto& [subset, c] : counts) worst = std::max(worst, std::abs(c - expect) / sigma);
  const bool uniform = counts.size() == 10 && worst <= 3.0;
  return {labeled > 0 && outside == 0 && a.qrels == b.qrels && uniform,
          std::to_string(labeled) + " labels, " + std::to_string(outside) +
              " outside top-5, reruns " + (a.qrels == b.qrels ? "identical" : "differ") + ", " +
              std::to_string(counts.size()) + " subsets, max deviation " + fmt("%.2f", worst) +
              " sigma"};
}

Outcome frozen_encoder() {
  synthetic::FixtureOptions o;
  o.topics = 6;
  o.train_sessions_per_topic = 3;
  const auto fx = synthetic::make_desk_fixture(o);
  const auto passage = retrieval::HashedProjectionEncoder::random_init(
      retrieval::EncoderRole::passage, 64, 1 << 15, 384, 7);
  std::vector<std::vector<double>> before;
  for (std::size_t i = 0; i < 100 && i < fx.collection.size(); ++i)
    before.push_back(passage.encode(fx.collection.at(i).text));
  auto query = passage.with_role(retrieval::EncoderRole::query, 512);
  const auto examples = train::build_training_examples(fx.train.sessions, fx.train.qrels, 512);
  train::TrainConfig cfg;
  cfg.learning_rate = 0.01;
  cfg.epochs = 3;
  const auto report = train::train(examples, query, passage, fx.collection, cfg);
  int changed = 0;
  for (std::size_t i = 0; i < before.size(); ++i)
    if (passage.encode(fx.collection.at(i).text) != before[i]) ++changed;
  bool query_moved = !std::equal(query.weights().begin(), query.weights().end(),
                                 passage.weights().begin());
  return {before.size() == 100 && changed == 0 && query_moved && report.steps > 0,
          std::to_string(before.size()) + " probe passages, " + std::to_string(changed) +
              " changed after " + std::to_string(report.steps) + " steps"};
}

std::size_t data_rows(const std::string& csv) {
  std::size_t lines = 0;
  for (char c : csv) lines += c == '\n' ? 1 : 0;
  return lines == 0 ? 0 : lines - 1;
}

Outcome ablation_reproducibility(const fs::path& root) {
  auto run = [&](const std::string& name) {
    auto json = pipeline::load_config_file(pipeline::make_fixture(root / name, 2024));
    const auto cfg = pipeline::parse_config(json);
    pipeline::run_data_size_ablation(cfg);
    pipeline::run_query_form_ablation(cfg);
    return std::make_pair(testing::read_file(cfg.workspace / "ablation_size.csv"),
                          testing::read_file(cfg.workspace / "ablation_form.csv"));
  };
  const auto a = run("abl_a");
  const auto b = run("abl_b");
  const bool same = a == b;
  const auto size_rows = data_rows(a.first);
  const auto form_rows = data_rows(a.second);
  return {same && size_rows == 4 && form_rows == 4,
          std::string("csv files ") + (same ? "byte-identical" : "differ") + ", size rows " +
              std::to_string(size_rows) + ", form rows " + std::to_string(form_rows)};
}

}  // namespace

int main() {
  testing::TempDir root;
  Checker check;
  check.run("metrics-vs-reference", 10, metric_oracle);
  check.run("loss-gradient", 10, gradient_check);
  check.run("dense-search", 60, dense_search_checks);
  check.run("augmentation-counts", 60, augmentation_counts);
  check.run("end-to-end-gain", 300, [&] { return end_to_end(root.path()); });
  check.run("pseudo-relevance-labels", 60, prf_checks);
  check.run("frozen-passage-encoder", 60, frozen_encoder);
  check.run("ablation-reproducibility", 300, [&] { return ablation_reproducibility(root.path()); });
  std::printf("%d criteria failed\n", check.failures());
  return check.failures() == 0 ? 0 : 1;
}
