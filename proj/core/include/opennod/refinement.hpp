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

#include <span>
#include <string>
#include <vector>

#include "opennod/backend.hpp"
#include "opennod/fusion.hpp"
#include "opennod/geometry.hpp"
#include "opennod/rle.hpp"
#include "opennod/saeg.hpp"

namespace opennod {

struct ScorePair {
  double combined = 0.0;
  double sam = 0.0;
};

struct MaskBox {
  BBox box;
  bool fallback = false;
};

/// Tight box [min_col, min_row, max_col + 1, max_row + 1] of the mask
/// foreground, in mask pixel coordinates. An empty mask yields `fallback`
/// with the flag set. Throws InvariantError on a malformed RLE.
MaskBox mask_to_box(const SegmentationResult& seg, const BBox& fallback);

/// (x - min) / (max - min); a constant input maps to all zeros.
/// Throws InvariantError when empty or non-finite.
std::vector<double> minmax(std::span<const double> scores);

/// Score refinement: minmax(combined) * minmax(sam), element-wise.
std::vector<double> srm(std::span<const ScorePair> pairs);
/// Throws InvariantError when the lists differ in length.
std::vector<double> srm(std::span<const double> combined, std::span<const double> sam);

/// Indices of the `k` best entries ordered by score descending, then
/// tie-break descending, then index ascending.
std::vector<std::size_t> top_k_order(std::span<const double> scores, std::span<const double> tie_break, std::size_t k);

struct RefineOptions {
  std::size_t k = 300;
  bool use_sam = true;
  bool use_srm = true;
};

struct RefineResult {
  std::vector<RefinedDetection> detections;
  std::vector<std::string> warnings;
};

/// Prompts the segmenter with every pool box in one call, replaces boxes by
/// their mask boxes, rescores with SRM, and keeps the top k. Without SAM the
/// pool is only sorted by its combined scores and truncated; without SRM the
/// mask boxes keep their combined scores.
RefineResult refine(const FusedPool& pool, const ImageRef& image, ImageSize size, Backend* backend,
                    const RefineOptions& options);

}  // namespace opennod
