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

#include <stdexcept>
#include <string>

namespace convsdg {

// Root of every exception thrown by the library. The C API maps each
// subclass onto one status code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Precondition violated by the caller.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// An input file violates its format or a type invariant.
class FormatError : public Error {
 public:
  using Error::Error;
};

// An LLM completion could not be turned into the requested structure.
class ParseError : public Error {
 public:
  using Error::Error;
};

class TransportError : public Error {
 public:
  TransportError(const std::string& what, int last_status, int attempts)
      : Error(what), last_status_(last_status), attempts_(attempts) {}

  // HTTP status of the final attempt, or -1 when no response arrived.
  int last_status() const { return last_status_; }
  int attempts() const { return attempts_; }

 private:
  int last_status_;
  int attempts_;
};

class GenerationFailed : public Error {
 public:
  GenerationFailed(const std::string& topic_id, const std::string& detail)
      : Error("generation failed for topic '" + topic_id + "': " + detail),
        topic_id_(topic_id) {}

  const std::string& topic_id() const { return topic_id_; }

 private:
  std::string topic_id_;
};

class TrainingDiverged : public Error {
 public:
  using Error::Error;
};

// A pipeline stage aborted; the message names the stage and its inputs.
class StageFailed : public Error {
 public:
  StageFailed(const std::string& stage, const std::string& detail)
      : Error("stage '" + stage + "' failed: " + detail), stage_(stage) {}

  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

}  // namespace convsdg
