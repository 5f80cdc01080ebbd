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

#include <filesystem>
#include <string>

#include "opennod/evaluation.hpp"

namespace opennod {

/// report.json. Undefined APs (no ground truth in the group) serialize as null.
std::string report_to_json(const EvalReport& report, std::string_view mode);
/// report.md: known/novel/all AP table, recall counts, per-class table.
/// `ap50_table` adds an AP50-only table.
std::string report_to_markdown(const EvalReport& report, std::string_view mode, bool ap50_table);

}  // namespace opennod
