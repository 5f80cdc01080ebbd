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

#include "opennod/rle.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "opennod/errors.hpp"

namespace opennod {

BinaryMask::BinaryMask(std::size_t height, std::size_t width)
    : height_(height), width_(width), bits_(height * width, 0) {}

std::size_t BinaryMask::count() const noexcept {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

void validate_rle(const RleMask& rle) {
  const std::uint64_t total =
      std::accumulate(rle.counts.begin(), rle.counts.end(), std::uint64_t{0});
  const std::uint64_t expected = static_cast<std::uint64_t>(rle.height) * rle.width;
  if (total != expected) {
    throw InvariantError("RLE counts sum to " + std::to_string(total) + ", expected " +
                         std::to_string(rle.height) + "x" + std::to_string(rle.width) + "=" +
                         std::to_string(expected));
  }
}

BinaryMask decode_rle(const RleMask& rle) {
  validate_rle(rle);
  BinaryMask mask(rle.height, rle.width);
  std::size_t pos = 0;
  bool fg = false;
  for (const std::uint32_t run : rle.counts) {
    if (fg) {
      for (std::size_t i = 0; i < run; ++i) {
        const std::size_t idx = pos + i;
        mask.set(idx % rle.height, idx / rle.height, true);
      }
    }
    pos += run;
    fg = !fg;
  }
  return mask;
}

RleMask encode_rle(const BinaryMask& mask) {
  RleMask rle{mask.height(), mask.width(), {}};
  const auto& bits = mask.column_major();
  std::uint8_t current = 0;
  std::uint32_t run = 0;
  for (const std::uint8_t b : bits) {
    if (b != current) {
      rle.counts.push_back(run);
      run = 0;
      current = b;
    }
    ++run;
  }
  rle.counts.push_back(run);
  return rle;
}

std::optional<BBox> rle_tight_box(const RleMask& rle) {
  validate_rle(rle);
  const std::size_t h = rle.height;
  std::size_t min_row = h, max_row = 0;
  std::size_t min_col = rle.width, max_col = 0;
  bool any = false;
  std::size_t pos = 0;
  bool fg = false;
  for (const std::uint32_t run : rle.counts) {
    if (fg && run > 0) {
      const std::size_t first = pos;
      const std::size_t last = pos + run - 1;
      const std::size_t c0 = first / h, r0 = first % h;
      const std::size_t c1 = last / h, r1 = last % h;
      any = true;
      min_col = std::min(min_col, c0);
      max_col = std::max(max_col, c1);
      if (c0 == c1) {
        min_row = std::min(min_row, r0);
        max_row = std::max(max_row, r1);
      } else {
        // The run wraps a column boundary: it touches row h-1 in c0 and row 0 in c1.
        min_row = 0;
        max_row = h - 1;
      }
    }
    pos += run;
    fg = !fg;
  }
  if (!any) return std::nullopt;
  return BBox{static_cast<double>(min_col), static_cast<double>(min_row),
              static_cast<double>(max_col + 1), static_cast<double>(max_row + 1)};
}

}  // namespace opennod
