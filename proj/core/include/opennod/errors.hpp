// Copyright 2026 The OpenNOD Authors
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

#include <cstddef>
#include <stdexcept>
#include <string>

namespace opennod {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file or message. Carries the source name and, when known,
/// the 1-based line and the offending field path.
class ParseError : public Error {
 public:
  ParseError(std::string source, std::size_t line, std::string field, const std::string& what);

  const std::string& source() const noexcept { return source_; }
  std::size_t line() const noexcept { return line_; }
  const std::string& field() const noexcept { return field_; }

 private:
  std::string source_;
  std::size_t line_;
  std::string field_;
};

/// Transport failures, protocol violations, and error responses from the model backend.
class BackendError : public Error {
 public:
  using Error::Error;
};

/// A value violates a documented precondition or domain invariant.
class InvariantError : public Error {
 public:
  using Error::Error;
};

}  // namespace opennod
