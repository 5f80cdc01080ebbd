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
#include <optional>
#include <string_view>

namespace opennod {

/// Axis-aligned box in corner form, continuous pixel coordinates with the
/// origin at the top-left. Area is (x2 - x1) * (y2 - y1); no +1 correction.
struct BBox {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double width() const noexcept { return x2 - x1; }
  double height() const noexcept { return y2 - y1; }
  double area() const noexcept { return width() * height(); }
  bool valid() const noexcept;

  friend bool operator==(const BBox&, const BBox&) = default;
};

/// Which detector pool a detection came from: the closed-set detector's known
/// classes (KN), its unclassified proposals (BG), or the open-set detector (GD).
enum class SourceTag : std::uint8_t { KN, BG, GD };

std::string_view to_string(SourceTag tag) noexcept;
std::optional<SourceTag> parse_source_tag(std::string_view text) noexcept;

using ClassId = std::int32_t;
using ImageId = std::int64_t;

/// Detector output before labelling. BG records carry neither class nor score.
struct RawDetection {
  BBox box;
  std::optional<ClassId> class_id;
  std::optional<double> score;
  SourceTag source = SourceTag::KN;

  /// True when the class/score presence matches the source tag.
  bool consistent() const noexcept;

  friend bool operator==(const RawDetection&, const RawDetection&) = default;
};

struct LabeledDetection {
  BBox box;
  ClassId class_id = 0;
  double score = 0.0;
  SourceTag source = SourceTag::KN;

  friend bool operator==(const LabeledDetection&, const LabeledDetection&) = default;
};

struct RefinedDetection {
  BBox box;
  double score = 0.0;
  ClassId class_id = 0;
  SourceTag source = SourceTag::KN;
  double sam_score = 0.0;
  // Set when the mask was empty and the prompting box was kept.
  bool fallback_flag = false;

  friend bool operator==(const RefinedDetection&, const RefinedDetection&) = default;
};

/// Intersection over union. Zero when the union has no area.
double iou(const BBox& a, const BBox& b) noexcept;

/// Clips a box into [0, width] x [0, height]. Requires positive dimensions.
BBox clamp_to_image(const BBox& b, double width, double height);

}  // namespace opennod
