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

#include <atomic>
#include <chrono>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>

#include "datamodel.hpp"

namespace convsdg::llm {

// Defaults follow the chat-completion API defaults.
struct GenerationParams {
  double temperature = 1.0;
  int max_output_tokens = 1024;
  // Honoured exactly by the mock backend; forwarded as a hint over HTTP.
  std::optional<std::uint64_t> seed;
};

enum class BackendKind { http_chat, mock };

struct BackendDescriptor {
  BackendKind kind = BackendKind::mock;
  std::string endpoint;  // full chat-completions URL, http_chat only
  std::string model_name = "gpt-3.5-turbo";
  int rate_limit = 60;   // requests per rolling minute
  // Total attempts per request, the first one included.
  int max_retries = 3;
  double timeout_seconds = 60.0;
  int max_in_flight = 4;
  std::chrono::milliseconds backoff_base{500};
  std::chrono::milliseconds rate_window{60000};
  std::string api_key_env = "CONVSDG_API_KEY";
};

class TextBackend {
 public:
  virtual ~TextBackend() = default;
  virtual std::string complete(const std::string& prompt,
                               const GenerationParams& params) = 0;
};

// Deterministic offline backend. Recognizes the two prompt templates below
// and answers with a synthetic transcript or rewrite built from the tokens
// of the prompt; the output is a pure function of (prompt, seed).
class MockBackend final : public TextBackend {
 public:
  std::string complete(const std::string& prompt,
                       const GenerationParams& params) override;
};

// Sliding-window limiter shared by all requests of one backend.
class RateLimiter {
 public:
  using Clock = std::chrono::steady_clock;

  RateLimiter(int max_requests, std::chrono::milliseconds window);

  // Blocks until a slot in the current window is free, then takes it.
  void acquire();

 private:
  const int max_requests_;
  const std::chrono::milliseconds window_;
  std::mutex mu_;
  std::deque<Clock::time_point> stamps_;
};

// OpenAI-compatible chat-completions client with retry and rate limiting.
class HttpChatBackend final : public TextBackend {
 public:
  // Throws InvalidArgument when the endpoint or the credential is missing.
  explicit HttpChatBackend(BackendDescriptor descriptor);

  std::string complete(const std::string& prompt,
                       const GenerationParams& params) override;

  // Total HTTP attempts issued so far, retries included.
  int attempts_made() const { return attempts_.load(); }

 private:
  BackendDescriptor desc_;
  std::string api_key_;
  std::string origin_;  // scheme://host[:port]
  std::string path_;
  RateLimiter limiter_;
  std::counting_semaphore<1024> in_flight_;
  std::atomic<int> attempts_{0};
};

std::unique_ptr<TextBackend> make_backend(const BackendDescriptor& descriptor);

// Validates the prompt and the completion around backend.complete().
// Throws InvalidArgument on an empty prompt and ParseError when the backend
// returns only whitespace.
std::string generate(const std::string& prompt, const GenerationParams& params,
                     TextBackend& backend);

std::string render_dialogue_prompt(const TopicDescription& topic, int n_turns);
std::string render_rewrite_prompt(std::string_view query);

// Extracts `Q<i>:` / `A<i>:` pairs. Markers are case-insensitive and may be
// preceded by markdown bullets, numbering or emphasis. Text after a marker
// runs until the next marker. Throws ParseError when any of the first
// expected_turns pairs is missing or empty; extra pairs are dropped.
ConversationSession parse_session(std::string_view raw,
                                  const TopicDescription& topic,
                                  int expected_turns,
                                  std::string session_id = {});

}  // namespace convsdg::llm
