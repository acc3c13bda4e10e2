// Copyright 2026 The fcp Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at

//     http://www.apache.org/licenses/LICENSE-2.0

// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fcp {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Rejected argument or violated precondition.
class InvalidInputError : public Error {
 public:
  using Error::Error;
};

/// Query on a sketch that holds no values.
class EmptySketchError : public Error {
 public:
  using Error::Error;
};

/// Malformed sketch bytes; `offset` points at the first bad byte.
class DecodeError : public Error {
 public:
  DecodeError(const std::string& what, std::size_t offset)
      : Error(what + " (offset " + std::to_string(offset) + ")"), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

/// Malformed score-file row; `line` is 1-based (header is line 1).
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Structurally valid file with inconsistent schema (e.g. class count drift).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Optimization produced a non-finite loss; `round` is the failing round.
class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, int round)
      : Error(what + " (round " + std::to_string(round) + ")"), round_(round) {}
  int round() const { return round_; }

 private:
  int round_;
};

/// Invalid run configuration; message starts with the offending field path.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace fcp
