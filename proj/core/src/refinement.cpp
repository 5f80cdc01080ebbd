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

#include "opennod/refinement.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "opennod/errors.hpp"

namespace opennod {

MaskBox mask_to_box(const SegmentationResult& seg, const BBox& fallback) {
  const auto box = rle_tight_box(seg.mask);
  if (!box) return {fallback, true};
  return {*box, false};
}

std::vector<double> minmax(std::span<const double> scores) {
  if (scores.empty()) throw InvariantError("minmax: empty score list");
  for (const double s : scores) {
    if (!std::isfinite(s)) throw InvariantError("minmax: non-finite score");
  }
  const auto [lo_it, hi_it] = std::minmax_element(scores.begin(), scores.end());
  const double lo = *lo_it;
  double range = *hi_it - lo;
  if (range == 0.0) range = 1.0;
  std::vector<double> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) out[i] = (scores[i] - lo) / range;
  return out;
}

std::vector<double> srm(std::span<const double> combined, std::span<const double> sam) {
  if (combined.size() != sam.size()) {
    throw InvariantError("srm: " + std::to_string(combined.size()) + " combined scores but " +
                         std::to_string(sam.size()) + " SAM scores");
  }
  const auto a = minmax(combined);
  const auto b = minmax(sam);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

std::vector<double> srm(std::span<const ScorePair> pairs) {
  std::vector<double> combined(pairs.size());
  std::vector<double> sam(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    combined[i] = pairs[i].combined;
    sam[i] = pairs[i].sam;
  }
  return srm(combined, sam);
}

std::vector<std::size_t> top_k_order(std::span<const double> scores, std::span<const double> tie_break,
                                     std::size_t k) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    if (tie_break[a] != tie_break[b]) return tie_break[a] > tie_break[b];
    return a < b;
  });
  if (order.size() > k) order.resize(k);
  return order;
}

RefineResult refine(const FusedPool& pool, const ImageRef& image, ImageSize size, Backend* backend,
                    const RefineOptions& options) {
  if (options.k == 0) throw InvariantError("refine: k must be positive");
  RefineResult result;
  const auto& dets = pool.detections;
  if (dets.empty()) return result;

  std::vector<RefinedDetection> refined(dets.size());
  std::vector<double> combined(dets.size());
  for (std::size_t i = 0; i < dets.size(); ++i) {
    combined[i] = dets[i].score;
    refined[i] = RefinedDetection{clamp_to_image(dets[i].box, size.width, size.height), dets[i].score,
                                  dets[i].class_id, dets[i].source, 0.0, false};
  }

  std::vector<double> final_scores = combined;
  if (options.use_sam) {
    if (!backend) throw InvariantError("refine: SAM refinement requires a backend");
    std::vector<BBox> prompts(dets.size());
    for (std::size_t i = 0; i < dets.size(); ++i) prompts[i] = refined[i].box;
    const auto masks = backend->segment_boxes(image, prompts);
    if (masks.size() != prompts.size()) {
      throw BackendError("backend returned " + std::to_string(masks.size()) + " masks for " +
                         std::to_string(prompts.size()) + " prompt boxes");
    }
    std::vector<double> sam(dets.size());
    for (std::size_t i = 0; i < dets.size(); ++i) {
      const MaskBox mb = mask_to_box(masks[i], prompts[i]);
      BBox box = mb.box;
      if (!mb.fallback) {
        // Mask pixels map onto the image grid.
        const double sx = size.width / static_cast<double>(masks[i].mask.width);
        const double sy = size.height / static_cast<double>(masks[i].mask.height);
        box = clamp_to_image(BBox{box.x1 * sx, box.y1 * sy, box.x2 * sx, box.y2 * sy}, size.width, size.height);
      }
      refined[i].box = box;
      refined[i].fallback_flag = mb.fallback;
      refined[i].sam_score = masks[i].sam_score;
      sam[i] = masks[i].sam_score;
    }
    const std::size_t fallbacks = static_cast<std::size_t>(
        std::count_if(refined.begin(), refined.end(), [](const RefinedDetection& r) { return r.fallback_flag; }));
    if (fallbacks > 0) {
      result.warnings.push_back(std::to_string(fallbacks) + " empty mask(s); prompting boxes kept");
    }
    if (options.use_srm) {
      if (std::adjacent_find(combined.begin(), combined.end(), std::not_equal_to<>()) == combined.end()) {
        result.warnings.push_back("uniform combined scores; SRM assigns zero to every detection");
      }
      final_scores = srm(combined, sam);
    }
  }

  for (std::size_t i = 0; i < dets.size(); ++i) refined[i].score = final_scores[i];
  for (const std::size_t i : top_k_order(final_scores, combined, options.k)) {
    result.detections.push_back(refined[i]);
  }
  return result;
}

}  // namespace opennod
