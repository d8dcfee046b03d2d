// Copyright 2026 The maskrefine Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MASKREFINE_ERROR_HPP
#define MASKREFINE_ERROR_HPP

#include <stdexcept>
#include <string>

namespace maskrefine {

// Two operands (or an operand and a container) disagree on width/height.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed serialized input: bad JSON, bad magic, inconsistent counts.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Well-formed input that violates a domain invariant.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline void require_same_shape(std::size_t w1, std::size_t h1, std::size_t w2,
                               std::size_t h2, const char* what) {
  if (w1 != w2 || h1 != h2) {
    throw DimensionError(std::string(what) + ": shape " + std::to_string(w1) +
                         "x" + std::to_string(h1) + " vs " +
                         std::to_string(w2) + "x" + std::to_string(h2));
  }
}

}  // namespace maskrefine

#endif  // MASKREFINE_ERROR_HPP
