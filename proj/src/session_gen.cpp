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

#include "session_gen.hpp"

#include <algorithm>
#include <atomic>
#include <iostream>
#include <optional>
#include <thread>

#include "errors.hpp"
#include "text.hpp"

namespace convsdg::gen {

ConversationSession generate_dialogue_session(const TopicDescription& topic,
                                              int n_turns,
                                              llm::TextBackend& backend,
                                              const llm::GenerationParams& params,
                                              std::string session_id,
                                              int retry_budget) {
  if (n_turns < 1) throw InvalidArgument("n_turns must be >= 1");
  if (trim(topic.description).empty())
    throw InvalidArgument("topic '" + topic.topic_id + "' has no description");
  if (session_id.empty()) session_id = topic.topic_id;

  const auto prompt = llm::render_dialogue_prompt(topic, n_turns);
  const std::uint64_t base_seed = params.seed.value_or(0);
  std::string last_error;
  for (int attempt = 0; attempt <= retry_budget; ++attempt) {
    auto attempt_params = params;
    if (attempt > 0) attempt_params.seed = mix_seed(base_seed, 1000 + attempt);
    try {
      auto raw = llm::generate(prompt, attempt_params, backend);
      auto session = llm::parse_session(raw, topic, n_turns, session_id);
      validate_session(session);
      return session;
    } catch (const ParseError& e) {
      last_error = e.what();
    } catch (const FormatError& e) {
      last_error = e.what();
    }
  }
  throw GenerationFailed(topic.topic_id,
                         "no parseable transcript after " +
                             std::to_string(retry_budget + 1) +
                             " attempts; last error: " + last_error);
}

SessionCorpus generate_session_corpus(const std::vector<TopicDescription>& topics,
                                      const CorpusOptions& options,
                                      llm::TextBackend& backend,
                                      const llm::GenerationParams& params) {
  if (topics.empty()) throw InvalidArgument("topic list is empty");
  if (options.sessions_per_topic < 1)
    throw InvalidArgument("sessions_per_topic must be >= 1");
  if (options.n_turns < 1) throw InvalidArgument("n_turns must be >= 1");

  struct Job {
    const TopicDescription* topic;
    int k;
  };
  std::vector<Job> jobs;
  for (const auto& t : topics)
    for (int k = 1; k <= options.sessions_per_topic; ++k) jobs.push_back({&t, k});

  std::vector<std::optional<ConversationSession>> produced(jobs.size());
  std::vector<std::string> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      const auto& job = jobs[i];
      auto job_params = params;
      job_params.seed = mix_seed(params.seed.value_or(0), static_cast<std::uint64_t>(job.k));
      const std::string sid = job.topic->topic_id + "-g" + std::to_string(job.k);
      try {
        produced[i] = generate_dialogue_session(*job.topic, options.n_turns, backend,
                                                job_params, sid, options.retry_budget);
      } catch (const Error& e) {
        errors[i] = sid + ": " + e.what();
      }
    }
  };
  const int n_threads =
      std::clamp(options.parallelism, 1, static_cast<int>(std::max<std::size_t>(jobs.size(), 1)));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
  }

  SessionCorpus corpus;
  corpus.report.requested = static_cast<int>(jobs.size());
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (produced[i]) {
      corpus.sessions.push_back(std::move(*produced[i]));
    } else {
      std::cerr << "warning: skipping " << errors[i] << '\n';
      corpus.report.failures.push_back(errors[i]);
    }
  }
  corpus.report.produced = static_cast<int>(corpus.sessions.size());
  corpus.report.failed = corpus.report.requested - corpus.report.produced;
  return corpus;
}

}  // namespace convsdg::gen
