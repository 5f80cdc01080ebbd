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
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "opennod/saeg.hpp"

namespace opennod {

enum class Mode { LVIS, COCO_OVD };

std::string_view to_string(Mode mode) noexcept;
std::optional<Mode> parse_mode(std::string_view text) noexcept;

/// Which classes a BG box may be labelled with.
enum class LabelScope { All, Novel };

/// Component switches for ablations.
struct Switches {
  bool use_gdino = true;
  bool use_bg_labelling = true;
  bool use_sam = true;
  bool use_srm = true;
  bool use_saeg = true;

  friend bool operator==(const Switches&, const Switches&) = default;
};

struct PipelineConfig {
  std::filesystem::path vocab;
  std::filesystem::path templates;
  std::filesystem::path dets_kn;
  std::filesystem::path dets_bg;
  std::filesystem::path dets_gd;
  std::filesystem::path gt;
  // Image list with sizes (gt.json layout). Falls back to `gt` when empty.
  std::filesystem::path images;
  std::filesystem::path image_root;
  std::filesystem::path cache_dir = "cache";
  std::filesystem::path output = "final.jsonl";
  std::filesystem::path report_dir = "report";
  // Optional fused-pool debug dump.
  std::filesystem::path fused_dump;

  std::string backend;
  double temperature = 0.01;
  ConfidenceMode confidence = ConfidenceMode::Softmax;
  LabelScope label_scope = LabelScope::All;
  double context_pad = 0.0;
  // Overrides the mode default (300 for LVIS, 100 for COCO_OVD).
  std::optional<std::size_t> k_final;
  Mode mode = Mode::LVIS;
  Switches switches;
  bool class_nms = false;
  double nms_iou = 0.5;
  bool strict_iou = false;
  std::size_t workers = 1;
  std::size_t max_batch = 64;

  std::size_t effective_k() const noexcept;
  const std::filesystem::path& image_list() const noexcept { return images.empty() ? gt : images; }
  std::filesystem::path matrix_path() const { return cache_dir / "class_matrix.bin"; }
  /// Throws InvariantError on out-of-range values.
  void validate() const;

  friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;
};

/// Parses the JSON config. Relative paths are resolved against `base_dir`.
/// Unknown keys are rejected.
PipelineConfig parse_config(std::string_view json_text, std::string_view source,
                            const std::filesystem::path& base_dir = {});
PipelineConfig load_config(const std::filesystem::path& path);
std::string serialize_config(const PipelineConfig& config);

}  // namespace opennod
