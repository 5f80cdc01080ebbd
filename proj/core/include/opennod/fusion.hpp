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

#include <map>
#include <span>
#include <string>
#include <vector>

#include "opennod/backend.hpp"
#include "opennod/detection_io.hpp"
#include "opennod/geometry.hpp"
#include "opennod/saeg.hpp"

namespace opennod {

/// Concatenated KN, BG, and GD detections of one image.
struct FusedPool {
  std::vector<LabeledDetection> detections;
  PoolCounts counts;
};

/// Concatenates in the order KN, BG, GD with no deduplication. Throws
/// InvariantError when a list holds a detection with the wrong source tag.
FusedPool fuse(std::span<const LabeledDetection> kn, std::span<const LabeledDetection> bg_labeled,
               std::span<const LabeledDetection> gd);

/// Passes KN/GD raw detections through as labeled ones. They must carry a
/// class and score.
std::vector<LabeledDetection> to_labeled(std::span<const RawDetection> raw);

/// Greedy per-class NMS over a pool; survivors keep pool order and counts are
/// recomputed.
FusedPool class_wise_nms(const FusedPool& pool, double iou_threshold);

/// Raw detections of one image, split by source.
struct ImageSources {
  std::vector<RawDetection> kn;
  std::vector<RawDetection> bg;
  std::vector<RawDetection> gd;
};

struct LabellingOptions {
  bool use_gdino = true;
  bool use_bg_labelling = true;
  bool class_nms = false;
  double nms_iou = 0.5;
  double context_pad = 0.0;
  ClassifyOptions classify;
};

/// Unknown-object labelling for one image: BG boxes go through
/// label_background, KN and GD pass through, then fuse. With BG labelling
/// off the BG boxes are dropped and no backend call is made.
FusedPool label_and_fuse(const ImageRef& image, ImageSize size, const ImageSources& sources,
                         const ClassTextMatrix* matrix, Backend* backend, const LabellingOptions& options);

struct ImageEntry {
  ImageRef ref;
  ImageSize size;
};

/// Whole-dataset form of label_and_fuse over images keyed by id.
std::map<ImageId, FusedPool> run_unknown_labelling(const std::map<ImageId, ImageSources>& raw,
                                                   const std::map<ImageId, ImageEntry>& images,
                                                   const ClassTextMatrix* matrix, Backend* backend,
                                                   const LabellingOptions& options);

/// Groups per-source dumps by image. Images absent from some dump simply get
/// an empty list for that source.
std::map<ImageId, ImageSources> group_sources(const RawByImage& kn, const RawByImage& bg, const RawByImage& gd);

}  // namespace opennod
