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

#include "opennod/fusion.hpp"

#include <algorithm>
#include <numeric>

#include "opennod/errors.hpp"

namespace opennod {

namespace {

void check_tags(std::span<const LabeledDetection> dets, SourceTag expected) {
  for (const auto& d : dets) {
    if (d.source != expected) {
      throw InvariantError("fuse: " + std::string(to_string(expected)) + " list contains a " +
                           std::string(to_string(d.source)) + " detection");
    }
  }
}

PoolCounts tally(std::span<const LabeledDetection> dets) {
  PoolCounts c;
  for (const auto& d : dets) {
    switch (d.source) {
      case SourceTag::KN:
        ++c.n_kn;
        break;
      case SourceTag::BG:
        ++c.n_bg;
        break;
      case SourceTag::GD:
        ++c.n_gd;
        break;
    }
  }
  return c;
}

}  // namespace

FusedPool fuse(std::span<const LabeledDetection> kn, std::span<const LabeledDetection> bg_labeled,
               std::span<const LabeledDetection> gd) {
  check_tags(kn, SourceTag::KN);
  check_tags(bg_labeled, SourceTag::BG);
  check_tags(gd, SourceTag::GD);
  FusedPool pool;
  pool.detections.reserve(kn.size() + bg_labeled.size() + gd.size());
  pool.detections.insert(pool.detections.end(), kn.begin(), kn.end());
  pool.detections.insert(pool.detections.end(), bg_labeled.begin(), bg_labeled.end());
  pool.detections.insert(pool.detections.end(), gd.begin(), gd.end());
  pool.counts = {kn.size(), bg_labeled.size(), gd.size()};
  return pool;
}

std::vector<LabeledDetection> to_labeled(std::span<const RawDetection> raw) {
  std::vector<LabeledDetection> out;
  out.reserve(raw.size());
  for (const auto& r : raw) {
    if (r.source == SourceTag::BG || !r.class_id || !r.score) {
      throw InvariantError("to_labeled: " + std::string(to_string(r.source)) +
                           " detection without class and score cannot pass through");
    }
    out.push_back(LabeledDetection{r.box, *r.class_id, *r.score, r.source});
  }
  return out;
}

FusedPool class_wise_nms(const FusedPool& pool, double iou_threshold) {
  const auto& dets = pool.detections;
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
  std::vector<bool> keep(dets.size(), false);
  std::vector<std::size_t> kept;
  for (const std::size_t i : order) {
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](std::size_t k) {
      return dets[k].class_id == dets[i].class_id && iou(dets[k].box, dets[i].box) > iou_threshold;
    });
    if (!suppressed) {
      keep[i] = true;
      kept.push_back(i);
    }
  }
  FusedPool out;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    if (keep[i]) out.detections.push_back(dets[i]);
  }
  out.counts = tally(out.detections);
  return out;
}

FusedPool label_and_fuse(const ImageRef& image, ImageSize size, const ImageSources& sources,
                         const ClassTextMatrix* matrix, Backend* backend, const LabellingOptions& options) {
  const auto kn = to_labeled(sources.kn);
  const auto gd = options.use_gdino ? to_labeled(sources.gd) : std::vector<LabeledDetection>{};
  std::vector<LabeledDetection> bg;
  if (options.use_bg_labelling && !sources.bg.empty()) {
    if (!matrix || !backend) throw InvariantError("BG labelling requires a class matrix and a backend");
    bg = label_background(sources.bg, image, size, *matrix, *backend, options.classify, options.context_pad);
  }
  FusedPool pool = fuse(kn, bg, gd);
  if (options.class_nms) pool = class_wise_nms(pool, options.nms_iou);
  return pool;
}

std::map<ImageId, FusedPool> run_unknown_labelling(const std::map<ImageId, ImageSources>& raw,
                                                   const std::map<ImageId, ImageEntry>& images,
                                                   const ClassTextMatrix* matrix, Backend* backend,
                                                   const LabellingOptions& options) {
  std::map<ImageId, FusedPool> out;
  for (const auto& [id, sources] : raw) {
    const auto it = images.find(id);
    if (it == images.end()) throw InvariantError("image " + std::to_string(id) + " is missing from the image list");
    out.emplace(id, label_and_fuse(it->second.ref, it->second.size, sources, matrix, backend, options));
  }
  return out;
}

std::map<ImageId, ImageSources> group_sources(const RawByImage& kn, const RawByImage& bg, const RawByImage& gd) {
  std::map<ImageId, ImageSources> out;
  for (const auto& [id, list] : kn) out[id].kn = list;
  for (const auto& [id, list] : bg) out[id].bg = list;
  for (const auto& [id, list] : gd) out[id].gd = list;
  return out;
}

}  // namespace opennod
