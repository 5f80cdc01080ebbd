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
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "opennod/backend.hpp"
#include "opennod/config.hpp"
#include "opennod/detection_io.hpp"
#include "opennod/evaluation.hpp"
#include "opennod/log.hpp"
#include "opennod/saeg.hpp"

namespace opennod {

/// Endpoint precedence: explicit flag, then the OPENNOD_BACKEND environment
/// variable, then the config value.
std::string resolve_backend_endpoint(const std::string& config_value, const std::optional<std::string>& flag);

/// A factory that opens a fresh protocol session to `endpoint` per call.
BackendFactory endpoint_factory(const std::string& endpoint, std::size_t max_batch = 64);

/// Cache key binding a matrix to its vocabulary, templates, backend identity,
/// and the SAEG switch.
std::uint64_t matrix_cache_key(const ClassVocabulary& vocab, const PromptTemplateSet& templates,
                               const std::string& backend_identity, bool use_saeg);

struct BuildMatrixResult {
  bool cache_hit = false;
  std::filesystem::path path;
  std::uint64_t cache_key = 0;
  ClassTextMatrix matrix;
};

/// Builds the class text matrix, or reuses the cached file when its header
/// matches the current inputs. A stale cache is rebuilt with a warning.
BuildMatrixResult cmd_build_matrix(const PipelineConfig& config, const BackendFactory& backend, EventLog& log);

struct ImageFailure {
  ImageId image = 0;
  std::string message;
};

struct RunResult {
  std::size_t images_ok = 0;
  std::vector<ImageFailure> failures;
  std::map<ImageId, PoolCounts> pool_counts;
  RefinedByImage detections;
};

/// Fusion, unknown-object labelling, and refinement for every image found in
/// the dumps; writes config.output (and config.fused_dump when set). Images
/// are spread over config.workers threads, each with its own backend session;
/// the output does not depend on the worker count. Per-image failures are
/// collected and also written to "<output>.errors.jsonl".
RunResult cmd_run(const PipelineConfig& config, const BackendFactory& backend, EventLog& log);

struct EvalResult {
  EvalReport report;
  std::filesystem::path json_path;
  std::filesystem::path markdown_path;
};

/// Evaluates `predictions` (final.jsonl) against config.gt and writes
/// report.json and report.md into config.report_dir.
EvalResult cmd_eval(const PipelineConfig& config, const std::filesystem::path& predictions, EventLog& log);

}  // namespace opennod
