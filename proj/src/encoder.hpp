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

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace convsdg::retrieval {

enum class EncoderRole { query, passage };
enum class EncoderBackend { hashed_projection, pretrained_transformer };

inline constexpr int kQueryMaxLen = 64;
inline constexpr int kPassageMaxLen = 384;
inline constexpr int kSessionMaxLen = 512;
inline constexpr int kDefaultDim = 64;
inline constexpr int kDefaultHashWidth = 1 << 15;

// Query-role encoders keep the last max_len tokens (the current turn sits at
// the end of a reformulated query); passage-role encoders keep the first.
std::vector<std::string> truncate_tokens(std::vector<std::string> tokens, int max_len,
                                         EncoderRole role);

class Encoder {
 public:
  virtual ~Encoder() = default;
  virtual EncoderBackend backend() const = 0;
  virtual EncoderRole role() const = 0;
  virtual int dim() const = 0;
  virtual int max_len() const = 0;
  // Exactly dim() finite components.
  virtual std::vector<double> encode(std::string_view text) const = 0;
};

using SparseFeatures = std::vector<std::pair<std::uint32_t, double>>;

// Tokens are hashed into hash_width buckets; the bucket counts are mapped to
// dim components by a dense dim x hash_width matrix (row-major).
class HashedProjectionEncoder final : public Encoder {
 public:
  HashedProjectionEncoder(EncoderRole role, int dim, int hash_width, int max_len,
                          std::vector<float> weights);

  // Entries uniform in [-sqrt(3/dim), sqrt(3/dim)], so a single token maps
  // to a vector of expected unit norm.
  static HashedProjectionEncoder random_init(EncoderRole role, int dim, int hash_width,
                                             int max_len, std::uint64_t seed);

  EncoderBackend backend() const override { return EncoderBackend::hashed_projection; }
  EncoderRole role() const override { return role_; }
  int dim() const override { return dim_; }
  int max_len() const override { return max_len_; }
  int hash_width() const { return hash_width_; }

  std::vector<double> encode(std::string_view text) const override;

  // Bucket counts of the truncated token sequence, sorted by bucket.
  SparseFeatures features(std::string_view text) const;
  std::vector<double> project(const SparseFeatures& features) const;

  std::span<const float> weights() const { return weights_; }
  std::span<float> mutable_weights() { return weights_; }

  // Same parameters under another role/length, e.g. a query encoder
  // initialized from the passage encoder.
  HashedProjectionEncoder with_role(EncoderRole role, int max_len) const;

 private:
  EncoderRole role_;
  int dim_;
  int hash_width_;
  int max_len_;
  std::vector<float> weights_;
};

std::uint32_t hash_bucket(std::string_view token, int hash_width);

// Checkpoint: u32 tag length, tag bytes ("hashed_projection"), u32 dim,
// u32 hash width, dim*hash_width little-endian float32 row-major.
void save_encoder(const HashedProjectionEncoder& encoder,
                  const std::filesystem::path& path);
HashedProjectionEncoder load_encoder(const std::filesystem::path& path,
                                     EncoderRole role, int max_len);

// Adapter for a pretrained transformer served behind an OpenAI-compatible
// embeddings endpoint. Inference only; training needs the hashed backend.
class RemoteEmbeddingEncoder final : public Encoder {
 public:
  struct Options {
    std::string endpoint;  // full URL of the embeddings route
    std::string model_name;
    std::string api_key_env = "CONVSDG_API_KEY";
    double timeout_seconds = 60.0;
  };

  RemoteEmbeddingEncoder(EncoderRole role, int dim, int max_len, Options options);

  EncoderBackend backend() const override {
    return EncoderBackend::pretrained_transformer;
  }
  EncoderRole role() const override { return role_; }
  int dim() const override { return dim_; }
  int max_len() const override { return max_len_; }
  std::vector<double> encode(std::string_view text) const override;

 private:
  EncoderRole role_;
  int dim_;
  int max_len_;
  Options options_;
  std::string origin_;
  std::string path_;
  std::string api_key_;
};

}  // namespace convsdg::retrieval
