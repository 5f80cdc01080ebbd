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

#include "opennod/geometry.hpp"

#include <algorithm>

#include "opennod/errors.hpp"

namespace opennod {

bool BBox::valid() const noexcept { return x2 >= x1 && y2 >= y1; }

std::string_view to_string(SourceTag tag) noexcept {
  switch (tag) {
    case SourceTag::KN:
      return "KN";
    case SourceTag::BG:
      return "BG";
    case SourceTag::GD:
      return "GD";
  }
  return "?";
}

std::optional<SourceTag> parse_source_tag(std::string_view text) noexcept {
  if (text == "KN" || text == "kn") return SourceTag::KN;
  if (text == "BG" || text == "bg") return SourceTag::BG;
  if (text == "GD" || text == "gd") return SourceTag::GD;
  return std::nullopt;
}

bool RawDetection::consistent() const noexcept {
  if (source == SourceTag::BG) return !class_id && !score;
  return class_id.has_value() && score.has_value();
}

double iou(const BBox& a, const BBox& b) noexcept {
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  const double inter = (iw > 0.0 && ih > 0.0) ? iw * ih : 0.0;
  const double uni = a.area() + b.area() - inter;
  if (!(uni > 0.0)) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

BBox clamp_to_image(const BBox& b, double width, double height) {
  if (!(width > 0.0) || !(height > 0.0)) {
    throw InvariantError("clamp_to_image: image dimensions must be positive");
  }
  BBox out{std::clamp(b.x1, 0.0, width), std::clamp(b.y1, 0.0, height),
           std::clamp(b.x2, 0.0, width), std::clamp(b.y2, 0.0, height)};
  // An inverted input collapses to a zero-area box at its clipped origin.
  out.x2 = std::max(out.x2, out.x1);
  out.y2 = std::max(out.y2, out.y1);
  return out;
}

}  // namespace opennod
