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

#include "encoder.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <regex>

#include <httplib.h>
#include <json.hpp>

#include "errors.hpp"
#include "text.hpp"

namespace convsdg::retrieval {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

constexpr std::string_view kHashedTag = "hashed_projection";

void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw FormatError("truncated encoder checkpoint");
  return v;
}

}  // namespace

std::vector<std::string> truncate_tokens(std::vector<std::string> tokens, int max_len,
                                         EncoderRole role) {
  if (max_len < 0 || tokens.size() <= static_cast<std::size_t>(max_len)) return tokens;
  const auto keep = static_cast<std::ptrdiff_t>(max_len);
  if (role == EncoderRole::query)
    tokens.erase(tokens.begin(), tokens.end() - keep);
  else
    tokens.resize(static_cast<std::size_t>(max_len));
  return tokens;
}

std::uint32_t hash_bucket(std::string_view token, int hash_width) {
  return static_cast<std::uint32_t>(fnv1a64(token) % static_cast<std::uint64_t>(hash_width));
}

HashedProjectionEncoder::HashedProjectionEncoder(EncoderRole role, int dim, int hash_width,
                                                 int max_len, std::vector<float> weights)
    : role_(role), dim_(dim), hash_width_(hash_width), max_len_(max_len),
      weights_(std::move(weights)) {
  if (dim < 1 || hash_width < 1) throw InvalidArgument("dim and hash width must be >= 1");
  if (max_len < 1) throw InvalidArgument("max_len must be >= 1");
  if (weights_.size() != static_cast<std::size_t>(dim) * static_cast<std::size_t>(hash_width))
    throw InvalidArgument("weight matrix does not match dim x hash_width");
}

HashedProjectionEncoder HashedProjectionEncoder::random_init(EncoderRole role, int dim,
                                                             int hash_width, int max_len,
                                                             std::uint64_t seed) {
  if (dim < 1 || hash_width < 1) throw InvalidArgument("dim and hash width must be >= 1");
  std::vector<float> w(static_cast<std::size_t>(dim) * static_cast<std::size_t>(hash_width));
  Rng rng(seed);
  const double scale = std::sqrt(3.0 / dim);
  for (auto& x : w) x = static_cast<float>((2.0 * rng.uniform() - 1.0) * scale);
  return HashedProjectionEncoder(role, dim, hash_width, max_len, std::move(w));
}

SparseFeatures HashedProjectionEncoder::features(std::string_view text) const {
  auto tokens = truncate_tokens(tokenize(text), max_len_, role_);
  std::map<std::uint32_t, double> counts;
  for (const auto& tok : tokens) counts[hash_bucket(tok, hash_width_)] += 1.0;
  return {counts.begin(), counts.end()};
}

std::vector<double> HashedProjectionEncoder::project(const SparseFeatures& features) const {
  std::vector<double> out(static_cast<std::size_t>(dim_), 0.0);
  const auto hw = static_cast<std::size_t>(hash_width_);
  for (std::size_t d = 0; d < out.size(); ++d) {
    const float* row = weights_.data() + d * hw;
    double acc = 0.0;
    for (const auto& [bucket, count] : features) acc += static_cast<double>(row[bucket]) * count;
    out[d] = acc;
  }
  return out;
}

std::vector<double> HashedProjectionEncoder::encode(std::string_view text) const {
  return project(features(text));
}

HashedProjectionEncoder HashedProjectionEncoder::with_role(EncoderRole role,
                                                           int max_len) const {
  return HashedProjectionEncoder(role, dim_, hash_width_, max_len, weights_);
}

void save_encoder(const HashedProjectionEncoder& encoder,
                  const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  write_u32(out, static_cast<std::uint32_t>(kHashedTag.size()));
  out.write(kHashedTag.data(), static_cast<std::streamsize>(kHashedTag.size()));
  write_u32(out, static_cast<std::uint32_t>(encoder.dim()));
  write_u32(out, static_cast<std::uint32_t>(encoder.hash_width()));
  const auto w = encoder.weights();
  out.write(reinterpret_cast<const char*>(w.data()),
            static_cast<std::streamsize>(w.size() * sizeof(float)));
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

HashedProjectionEncoder load_encoder(const std::filesystem::path& path, EncoderRole role,
                                     int max_len) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  const auto tag_len = read_u32(in);
  if (tag_len > 256) throw FormatError("encoder checkpoint has a corrupt tag");
  std::string tag(tag_len, '\0');
  in.read(tag.data(), tag_len);
  if (tag != kHashedTag)
    throw FormatError("unsupported encoder backend tag '" + tag + "'");
  const auto dim = read_u32(in);
  const auto hw = read_u32(in);
  if (dim == 0 || hw == 0 || dim > 1u << 16 || hw > 1u << 26)
    throw FormatError("encoder checkpoint has implausible shape");
  std::vector<float> w(static_cast<std::size_t>(dim) * hw);
  in.read(reinterpret_cast<char*>(w.data()), static_cast<std::streamsize>(w.size() * sizeof(float)));
  if (!in) throw FormatError("truncated encoder checkpoint");
  if (in.peek() != std::char_traits<char>::eof())
    throw FormatError("trailing bytes in encoder checkpoint");
  return HashedProjectionEncoder(role, static_cast<int>(dim), static_cast<int>(hw), max_len,
                                 std::move(w));
}

// ---------------------------------------------------------------------------

RemoteEmbeddingEncoder::RemoteEmbeddingEncoder(EncoderRole role, int dim, int max_len,
                                               Options options)
    : role_(role), dim_(dim), max_len_(max_len), options_(std::move(options)) {
  static const std::regex url_re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(options_.endpoint, m, url_re))
    throw InvalidArgument("embedding endpoint must be an http(s) URL");
  origin_ = m[1];
  path_ = m[2].matched ? std::string(m[2]) : "/v1/embeddings";
  if (const char* key = std::getenv(options_.api_key_env.c_str())) api_key_ = key;
  if (dim < 1 || max_len < 1) throw InvalidArgument("dim and max_len must be >= 1");
}

std::vector<double> RemoteEmbeddingEncoder::encode(std::string_view text) const {
  const auto input = join(truncate_tokens(tokenize(text), max_len_, role_), " ");
  nlohmann::json body{{"model", options_.model_name}, {"input", input}};
  httplib::Client client(origin_);
  const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(
      std::chrono::duration<double>(options_.timeout_seconds));
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
  auto res = client.Post(path_, headers, body.dump(), "application/json");
  if (!res) throw TransportError("embedding endpoint unreachable", -1, 1);
  if (res->status != 200)
    throw TransportError("embedding endpoint returned HTTP " + std::to_string(res->status),
                         res->status, 1);
  std::vector<double> v;
  try {
    v = nlohmann::json::parse(res->body).at("data").at(0).at("embedding")
            .get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed embedding response: ") + e.what());
  }
  if (v.size() != static_cast<std::size_t>(dim_))
    throw FormatError("embedding has " + std::to_string(v.size()) + " components, expected " +
                      std::to_string(dim_));
  for (double x : v)
    if (!std::isfinite(x)) throw FormatError("embedding has a non-finite component");
  return v;
}

}  // namespace convsdg::retrieval
