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

// Deterministic desk-scale corpus for offline end-to-end runs.
//
// Each topic owns a core vocabulary and several subtopics with their own
// words; every passage belongs to one subtopic and mixes subtopic words,
// topic words and corpus-wide filler. Evaluation and training sessions ask
// about a single subtopic and judge that subtopic's passages relevant.

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "datamodel.hpp"
#include "query_aug.hpp"

namespace convsdg::synthetic {

struct FixtureOptions {
  int topics = 20;
  int subtopics = 5;
  int passages_per_subtopic = 10;
  int session_turns = 4;
  int eval_sessions_per_topic = 3;
  int train_sessions_per_topic = 1;
  std::uint64_t seed = 2024;
};

struct DeskFixture {
  PassageCollection collection;
  std::vector<TopicDescription> topics;
  aug::Dataset eval;   // held-out sessions with manual judgments
  aug::Dataset train;  // judged sessions for the semi-supervised setting
};

DeskFixture make_desk_fixture(const FixtureOptions& options = {});

struct FixturePaths {
  std::filesystem::path collection;
  std::filesystem::path topics;
  std::filesystem::path eval_sessions;
  std::filesystem::path eval_qrels;
  std::filesystem::path train_sessions;
  std::filesystem::path train_qrels;
};

FixturePaths write_desk_fixture(const DeskFixture& fixture, const std::filesystem::path& dir);

}  // namespace convsdg::synthetic
