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
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "opennod/geometry.hpp"

namespace opennod {

class ClassVocabulary;

using RawByImage = std::map<ImageId, std::vector<RawDetection>>;
using RefinedByImage = std::map<ImageId, std::vector<RefinedDetection>>;

/// Parses a JSON-lines detection dump: one {image_id, box, score?, class_id?}
/// record per line; blank lines are skipped. Every record gets `source`.
/// BG records must omit class_id and score; KN/GD records must carry both.
RawByImage parse_detections(std::istream& in, SourceTag source, std::string_view source_name);
RawByImage load_detections(const std::filesystem::path& path, SourceTag source);
void write_detections(std::ostream& out, const RawByImage& dets);

struct ImageInfo {
  ImageId id = 0;
  double width = 0.0;
  double height = 0.0;
  std::string file_name;
};

struct GroundTruthBox {
  BBox box;
  ClassId class_id = 0;
};

struct GroundTruthImage {
  ImageInfo info;
  std::vector<GroundTruthBox> boxes;
};

/// COCO-like annotation set with corner-form boxes. Images without
/// annotations are kept: they still count for image lookup.
struct GroundTruthSet {
  std::map<ImageId, GroundTruthImage> images;

  const ImageInfo* find_image(ImageId id) const;
  std::size_t box_count() const;
};

/// When `vocab` is given, category ids are checked against it.
GroundTruthSet parse_ground_truth(std::string_view json_text, std::string_view source,
                                  const ClassVocabulary* vocab = nullptr);
GroundTruthSet load_ground_truth(const std::filesystem::path& path, const ClassVocabulary* vocab = nullptr);
std::string ground_truth_to_json(const GroundTruthSet& gt);

/// final.jsonl: one {image_id, box, score, class_id, source, fallback_flag}
/// record per line, images ascending, detections in rank order.
void write_final(std::ostream& out, const RefinedByImage& dets);
RefinedByImage parse_final(std::istream& in, std::string_view source_name);
RefinedByImage load_final(const std::filesystem::path& path);

struct PoolCounts {
  std::size_t n_kn = 0;
  std::size_t n_bg = 0;
  std::size_t n_gd = 0;

  std::size_t total() const noexcept { return n_kn + n_bg + n_gd; }
  friend bool operator==(const PoolCounts&, const PoolCounts&) = default;
};

/// fused.jsonl: one line per image with per-source counts and the detections.
void write_fused_line(std::ostream& out, ImageId image, const PoolCounts& counts,
                      const std::vector<LabeledDetection>& dets);

}  // namespace opennod
