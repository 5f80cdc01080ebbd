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
#include <cstdint>
#include <vector>

#include "opennod/geometry.hpp"

namespace opennod {

/// Dense binary mask stored column-major: element (row, col) lives at
/// col * height + row.
class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(std::size_t height, std::size_t width);

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t size() const noexcept { return bits_.size(); }

  bool at(std::size_t row, std::size_t col) const { return bits_[col * height_ + row] != 0; }
  void set(std::size_t row, std::size_t col, bool value) { bits_[col * height_ + row] = value ? 1 : 0; }

  const std::vector<std::uint8_t>& column_major() const noexcept { return bits_; }
  std::size_t count() const noexcept;

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// Uncompressed run-length encoding, column-major, with counts alternating
/// background/foreground starting at background. A mask that begins with
/// foreground has a leading zero count.
struct RleMask {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint32_t> counts;

  friend bool operator==(const RleMask&, const RleMask&) = default;
};

/// Segmentation backend answer for one prompt box.
struct SegmentationResult {
  RleMask mask;
  double sam_score = 0.0;
};

/// Throws InvariantError when the counts do not sum to height * width.
void validate_rle(const RleMask& rle);

BinaryMask decode_rle(const RleMask& rle);
RleMask encode_rle(const BinaryMask& mask);

/// Pixel extents of the foreground as [min_col, min_row, max_col + 1, max_row + 1].
/// Empty optional when the mask has no foreground. Works on the runs directly.
std::optional<BBox> rle_tight_box(const RleMask& rle);

}  // namespace opennod
