// Copyright 2026 The PerceptLab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace perceptlab {

/// Base of every error raised by the library. The CLI maps these to exit
/// code 1 (domain error).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inconsistent shapes, channel counts or parameter constraints.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Non-finite or out-of-range data handed to a layer.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Invalid scalar argument (negative sigma, empty grid, ...).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Non-finite loss or gradient during optimization.
class TrainingError : public Error {
 public:
  using Error::Error;
};

/// Corpus or dataset files missing or undecodable.
class IngestionError : public Error {
 public:
  using Error::Error;
};

/// Malformed text input; carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Checkpoint version mismatch, truncation or corruption.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Evaluation-time failures (shape mismatch, too many exclusions, undefined
/// correlation).
class EvaluationError : public Error {
 public:
  using Error::Error;
};

}  // namespace perceptlab
