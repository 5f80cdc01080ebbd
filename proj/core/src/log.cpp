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

#include "opennod/log.hpp"

#include <json.hpp>
#include <ostream>

namespace opennod {

void EventLog::emit(Level level, std::string_view stage, std::string_view message, const LogFields& fields) {
  std::lock_guard lock(mu_);
  if (level == Level::Warning) ++warnings_;
  if (level == Level::Error) ++errors_;
  if (!out_ || (!verbose_ && level == Level::Info)) return;
  nlohmann::json rec;
  rec["level"] = level == Level::Info ? "info" : level == Level::Warning ? "warning" : "error";
  rec["stage"] = stage;
  rec["message"] = message;
  for (const auto& [key, value] : fields) {
    std::visit([&, k = key](const auto& v) { rec[k] = v; }, value);
  }
  *out_ << rec.dump() << '\n';
  out_->flush();
}

std::size_t EventLog::warning_count() const {
  std::lock_guard lock(mu_);
  return warnings_;
}

std::size_t EventLog::error_count() const {
  std::lock_guard lock(mu_);
  return errors_;
}

}  // namespace opennod
