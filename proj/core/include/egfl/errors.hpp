// Copyright 2026 The egfl authors
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

#ifndef EGFL_ERRORS_HPP_
#define EGFL_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace egfl {

// Wrong arity / incongruent dimensions between caller-supplied objects.
class ShapeError : public std::invalid_argument {
 public:
  explicit ShapeError(const std::string& what) : std::invalid_argument(what) {}
};

// Non-finite intermediates, degenerate denominators, values escaping their
// mathematically required range.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// Gradient descent blew up (objective above the divergence ceiling).
class OracleDivergenceError : public NumericError {
 public:
  explicit OracleDivergenceError(const std::string& what) : NumericError(what) {}
};

// Recall requested on a label vector without positives.
class UndefinedRecallError : public std::runtime_error {
 public:
  explicit UndefinedRecallError(const std::string& what) : std::runtime_error(what) {}
};

// Synthetic data generation could not satisfy its invariants.
class GenerationError : public std::runtime_error {
 public:
  explicit GenerationError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed file content. Carries a 1-based line number when known.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, int line)
      : std::runtime_error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  explicit ParseError(const std::string& what) : std::runtime_error(what), line_(0) {}
  int line() const { return line_; }

 private:
  int line_;
};

// Invalid configuration value; message names the offending key.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace egfl

#endif  // EGFL_ERRORS_HPP_
