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

#include <cstdint>
#include <iosfwd>
#include <mutex>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace opennod {

using LogValue = std::variant<std::int64_t, double, bool, std::string>;
using LogFields = std::vector<std::pair<std::string, LogValue>>;

/// Structured event log: one JSON object per line. Thread-safe. A null
/// stream discards events.
class EventLog {
 public:
  enum class Level { Info, Warning, Error };

  explicit EventLog(std::ostream* out = nullptr, bool verbose = true) : out_(out), verbose_(verbose) {}

  void emit(Level level, std::string_view stage, std::string_view message, const LogFields& fields = {});
  void info(std::string_view stage, std::string_view message, const LogFields& fields = {}) {
    emit(Level::Info, stage, message, fields);
  }
  void warn(std::string_view stage, std::string_view message, const LogFields& fields = {}) {
    emit(Level::Warning, stage, message, fields);
  }
  void error(std::string_view stage, std::string_view message, const LogFields& fields = {}) {
    emit(Level::Error, stage, message, fields);
  }

  std::size_t warning_count() const;
  std::size_t error_count() const;

 private:
  std::ostream* out_;
  bool verbose_;
  mutable std::mutex mu_;
  std::size_t warnings_ = 0;
  std::size_t errors_ = 0;
};

}  // namespace opennod
