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

#include "llm_gateway.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <map>
#include <regex>
#include <set>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "errors.hpp"
#include "text.hpp"

namespace convsdg::llm {
namespace {

constexpr std::string_view kTurnCountLead = "It must contain exactly ";
constexpr std::string_view kDescriptionLead = "Description: ";
constexpr std::string_view kTitleLead = "Title: ";
constexpr std::string_view kQueryLead = "Input query: ";

const std::set<std::string>& stopwords() {
  static const std::set<std::string> words = {
      "the",   "and",  "for",   "are",  "was",   "were", "with",  "that",
      "this",  "from", "about", "into", "their", "they", "them",  "its",
      "has",   "have", "had",   "not",  "but",   "what", "which", "who",
      "how",   "why",  "when",  "where", "can",  "does", "did",   "also",
      "such",  "than", "then",  "these", "those", "there", "been", "being",
      "will",  "would", "could", "should", "may", "might", "more", "most",
      "some",  "any",  "all",   "each", "other", "our",  "your",  "his",
      "her",   "you",  "she",   "him",  "one",   "out",  "use",   "used",
      "user",  "information", "topic", "search", "looking", "wants", "want",
      "know",  "learn"};
  return words;
}

std::vector<std::string> content_words(std::string_view text) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (auto& tok : tokenize(text)) {
    if (tok.size() < 3 || stopwords().count(tok)) continue;
    if (seen.insert(tok).second) out.push_back(tok);
  }
  return out;
}

std::string line_after(std::string_view prompt, std::string_view lead) {
  auto pos = prompt.find(lead);
  if (pos == std::string_view::npos) return {};
  pos += lead.size();
  auto end = prompt.find('\n', pos);
  return std::string(prompt.substr(pos, end == std::string_view::npos
                                            ? std::string_view::npos
                                            : end - pos));
}

std::string pick(Rng& rng, const std::vector<std::string>& words) {
  return words[static_cast<std::size_t>(rng.below(words.size()))];
}

std::string mock_dialogue(std::string_view prompt, Rng& rng) {
  int n_turns = std::atoi(line_after(prompt, kTurnCountLead).c_str());
  if (n_turns < 1) n_turns = 1;
  auto words = content_words(line_after(prompt, kDescriptionLead));
  if (words.empty()) words = content_words(line_after(prompt, kTitleLead));
  if (words.empty()) words = {"subject"};

  static const std::vector<std::string> openers = {
      "what is known about {a} {b}", "tell me about {a} and {b}",
      "what are {a} {b}", "i want to learn about {a} {b}"};
  static const std::vector<std::string> follow_ups = {
      "how does it relate to {a} {b}", "what about their {a} {b}",
      "why are they important for {a} {b}", "how is it connected with {a} {b}",
      "what do {a} and {b} mean for it", "does it affect {a} {b}"};

  auto fill = [](std::string tmpl, const std::string& a, const std::string& b) {
    tmpl.replace(tmpl.find("{a}"), 3, a);
    tmpl.replace(tmpl.find("{b}"), 3, b);
    return tmpl;
  };

  std::ostringstream out;
  for (int i = 1; i <= n_turns; ++i) {
    const std::string a = pick(rng, words);
    const std::string b = pick(rng, words);
    const auto& templates = i == 1 ? openers : follow_ups;
    out << "Q" << i << ": " << fill(pick(rng, templates), a, b) << "?\n";
    out << "A" << i << ": " << a << " " << b;
    for (int w = 0; w < 5; ++w) out << " " << pick(rng, words);
    out << " are closely linked.\n";
  }
  return out.str();
}

std::string mock_rewrite(std::string_view prompt, Rng& rng) {
  auto query = trim(line_after(prompt, kQueryLead));
  while (!query.empty() && (query.back() == '?' || query.back() == '.'))
    query.pop_back();
  static const std::vector<std::string> frames = {
      "could you tell me {q}", "i would like to know {q}", "please explain {q}",
      "{q}, in other words", "help me understand {q}"};
  std::string out = pick(rng, frames);
  out.replace(out.find("{q}"), 3, to_lower(query));
  return out;
}

bool is_transient(int status) {
  return status == 408 || status == 429 || (status >= 500 && status <= 599);
}

}  // namespace

// ---------------------------------------------------------------------------

std::string MockBackend::complete(const std::string& prompt,
                                  const GenerationParams& params) {
  Rng rng(mix_seed(fnv1a64(prompt), params.seed.value_or(0)));
  if (prompt.find(kQueryLead) != std::string::npos) return mock_rewrite(prompt, rng);
  if (prompt.find(kDescriptionLead) != std::string::npos)
    return mock_dialogue(prompt, rng);
  return "ok";
}

RateLimiter::RateLimiter(int max_requests, std::chrono::milliseconds window)
    : max_requests_(std::max(1, max_requests)), window_(window) {}

void RateLimiter::acquire() {
  while (true) {
    Clock::duration wait{};
    {
      std::lock_guard lock(mu_);
      const auto now = Clock::now();
      while (!stamps_.empty() && now - stamps_.front() >= window_) stamps_.pop_front();
      if (static_cast<int>(stamps_.size()) < max_requests_) {
        stamps_.push_back(now);
        return;
      }
      wait = stamps_.front() + window_ - now;
    }
    std::this_thread::sleep_for(wait);
  }
}

HttpChatBackend::HttpChatBackend(BackendDescriptor descriptor)
    : desc_(std::move(descriptor)),
      limiter_(desc_.rate_limit, desc_.rate_window),
      in_flight_(std::clamp(desc_.max_in_flight, 1, 1024)) {
  static const std::regex url_re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (desc_.endpoint.empty() || !std::regex_match(desc_.endpoint, m, url_re))
    throw InvalidArgument("http_chat backend needs an http(s) endpoint URL, got '" +
                          desc_.endpoint + "'");
  origin_ = m[1];
  path_ = m[2].matched ? std::string(m[2]) : "/v1/chat/completions";
  const char* key = std::getenv(desc_.api_key_env.c_str());
  if (key == nullptr || *key == '\0')
    throw InvalidArgument("http_chat backend needs a credential in $" +
                          desc_.api_key_env);
  api_key_ = key;
  if (desc_.max_retries < 1) throw InvalidArgument("max_retries must be >= 1");
}

std::string HttpChatBackend::complete(const std::string& prompt,
                                      const GenerationParams& params) {
  in_flight_.acquire();
  struct Release {
    std::counting_semaphore<1024>& s;
    ~Release() { s.release(); }
  } release{in_flight_};

  nlohmann::json body;
  body["model"] = desc_.model_name;
  body["messages"] = nlohmann::json::array({{{"role", "user"}, {"content", prompt}}});
  body["temperature"] = params.temperature;
  body["max_tokens"] = params.max_output_tokens;
  if (params.seed) body["seed"] = *params.seed;
  const std::string payload = body.dump();

  httplib::Client client(origin_);
  const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(
      std::chrono::duration<double>(desc_.timeout_seconds));
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  httplib::Headers headers = {{"Authorization", "Bearer " + api_key_}};

  int last_status = -1;
  for (int attempt = 1; attempt <= desc_.max_retries; ++attempt) {
    limiter_.acquire();
    ++attempts_;
    auto res = client.Post(path_, headers, payload, "application/json");
    if (res) {
      last_status = res->status;
      if (res->status == 200) {
        try {
          auto j = nlohmann::json::parse(res->body);
          return j.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
          throw ParseError(std::string("malformed chat completion response: ") +
                           e.what());
        }
      }
      if (!is_transient(res->status))
        throw TransportError("chat endpoint returned HTTP " +
                                 std::to_string(res->status),
                             res->status, attempt);
    } else {
      last_status = -1;
    }
    if (attempt < desc_.max_retries) {
      auto delay = desc_.backoff_base * (1LL << std::min(attempt - 1, 6));
      std::this_thread::sleep_for(std::min<std::chrono::milliseconds>(
          delay, std::chrono::milliseconds(30000)));
    }
  }
  throw TransportError("chat endpoint failed after " +
                           std::to_string(desc_.max_retries) +
                           " attempts (last status " + std::to_string(last_status) + ")",
                       last_status, desc_.max_retries);
}

std::unique_ptr<TextBackend> make_backend(const BackendDescriptor& descriptor) {
  if (descriptor.kind == BackendKind::mock) return std::make_unique<MockBackend>();
  return std::make_unique<HttpChatBackend>(descriptor);
}

std::string generate(const std::string& prompt, const GenerationParams& params,
                     TextBackend& backend) {
  if (trim(prompt).empty()) throw InvalidArgument("prompt must not be empty");
  auto text = backend.complete(prompt, params);
  if (trim(text).empty()) throw ParseError("backend returned an empty completion");
  return text;
}

// ---------------------------------------------------------------------------
// Prompt templates

std::string render_dialogue_prompt(const TopicDescription& topic, int n_turns) {
  if (n_turns < 1) throw InvalidArgument("n_turns must be >= 1");
  std::ostringstream p;
  p << "You are simulating a user who searches for information by talking to "
       "a search engine.\n";
  if (n_turns == 1) {
    p << "Write a conversation session in one pass. " << kTurnCountLead
      << "1 turn: a single user query and a short answer.\n"
      << "Format it on two lines:\n"
      << "Q1: <user query>\n"
      << "A1: <answer>\n";
  } else {
    p << "Write the entire conversation session in one pass. " << kTurnCountLead
      << n_turns << " turns.\n"
      << "Each turn is a user query followed by a short answer, on two lines:\n"
      << "Q<i>: <user query>\n"
      << "A<i>: <answer>\n"
      << "Number the turns from Q1:/A1: to Q" << n_turns << ":/A" << n_turns
      << ":.\n"
      << "Each query explores a different aspect of the topic. Later queries "
         "depend on earlier turns the way real users do: refer back with "
         "pronouns (coreference) and leave out words that are already "
         "established (omission).\n";
  }
  p << "Output only the Q/A lines.\n\n"
    << "Topic information:\n"
    << kTitleLead << topic.title << "\n"
    << kDescriptionLead << topic.description << "\n";
  return p.str();
}

std::string render_rewrite_prompt(std::string_view query) {
  if (trim(query).empty()) throw InvalidArgument("query must not be empty");
  std::string p =
      "Rewrite the following search query as one alternative natural language "
      "expression with the same meaning. Keep the search intent unchanged. "
      "Output only the rewritten query on a single line.\n\n";
  p.append(kQueryLead);
  p.append(query);
  p.push_back('\n');
  return p;
}

// ---------------------------------------------------------------------------
// Transcript parsing

namespace {

std::string strip_decoration(std::string s) {
  bool changed = true;
  while (changed && !s.empty()) {
    changed = false;
    s = trim(s);
    for (std::string_view prefix : {"**", "__", "- ", "* ", "+ ", "> ", "#",
                                    "\xE2\x80\xA2"}) {
      if (s.rfind(prefix, 0) == 0) {
        s.erase(0, prefix.size());
        changed = true;
      }
    }
    // "1. " or "1) " list numbering
    std::size_t i = 0;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
    if (i > 0 && i + 1 < s.size() && (s[i] == '.' || s[i] == ')') && s[i + 1] == ' ') {
      s.erase(0, i + 2);
      changed = true;
    }
  }
  return s;
}

struct Marker {
  char kind;  // 'q' or 'a'
  int index;
  std::string rest;
};

std::optional<Marker> match_marker(const std::string& line) {
  static const std::regex re(R"(^([QqAa])\s*(\d+)\s*(?:\*\*|__)?\s*:\s*(?:\*\*|__)?\s*(.*)$)");
  std::smatch m;
  if (!std::regex_match(line, m, re)) return std::nullopt;
  return Marker{static_cast<char>(std::tolower(static_cast<unsigned char>(m[1].str()[0]))),
                std::stoi(m[2]), m[3]};
}

std::string clean_text(std::string s) {
  s = trim(s);
  for (std::string_view e : {"**", "__"}) {
    while (s.size() >= e.size() && s.compare(s.size() - e.size(), e.size(), e) == 0)
      s.erase(s.size() - e.size());
  }
  return trim(s);
}

}  // namespace

ConversationSession parse_session(std::string_view raw, const TopicDescription& topic,
                                  int expected_turns, std::string session_id) {
  if (expected_turns < 1) throw InvalidArgument("expected_turns must be >= 1");
  std::map<std::pair<char, int>, std::string> fields;
  std::string* current = nullptr;
  for (auto& raw_line : split(raw, '\n')) {
    auto line = strip_decoration(raw_line);
    if (auto marker = match_marker(line)) {
      auto key = std::make_pair(marker->kind, marker->index);
      if (fields.count(key))
        throw ParseError(std::string("marker ") + char(std::toupper(marker->kind)) +
                         std::to_string(marker->index) + ": appears twice");
      current = &fields[key];
      *current = marker->rest;
    } else if (current != nullptr && !trim(line).empty()) {
      current->push_back(' ');
      current->append(trim(line));
    }
  }

  ConversationSession session;
  session.session_id = session_id.empty() ? topic.topic_id : std::move(session_id);
  session.topic = topic;
  session.provenance = Provenance::dialogue_generated;
  for (int i = 1; i <= expected_turns; ++i) {
    auto q = fields.find({'q', i});
    auto a = fields.find({'a', i});
    if (q == fields.end() || a == fields.end())
      throw ParseError("transcript has fewer than " + std::to_string(expected_turns) +
                       " complete turns (missing " +
                       (q == fields.end() ? "Q" : "A") + std::to_string(i) + ":)");
    QueryTurn turn;
    turn.ordinal = i;
    turn.turn_id = default_turn_id(session.session_id, i);
    turn.query = clean_text(q->second);
    auto answer = clean_text(a->second);
    if (turn.query.empty())
      throw ParseError("empty query text at Q" + std::to_string(i) + ":");
    if (answer.empty())
      throw ParseError("empty answer text at A" + std::to_string(i) + ":");
    turn.answer = std::move(answer);
    session.turns.push_back(std::move(turn));
  }
  return session;
}

}  // namespace convsdg::llm
