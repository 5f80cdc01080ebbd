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

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "opennod/detection_io.hpp"
#include "opennod/geometry.hpp"
#include "opennod/vocabulary.hpp"

namespace opennod {

/// IoU thresholds 0.50, 0.55, ..., 0.95.
inline constexpr std::size_t kNumIouThresholds = 10;
std::array<double, kNumIouThresholds> iou_thresholds() noexcept;

/// Recall sample points 0.00, 0.01, ..., 1.00 for interpolated AP.
inline constexpr std::size_t kNumRecallPoints = 101;

struct IouRule {
  double threshold = 0.5;
  // Strict: a match needs IoU > threshold rather than >=.
  bool strict = false;

  bool accepts(double value) const noexcept { return strict ? value > threshold : value >= threshold; }
};

struct ScoredBox {
  BBox box;
  double score = 0.0;
};

struct MatchRecord {
  std::size_t detection = 0;
  std::optional<std::size_t> gt;
  double iou = 0.0;
  double score = 0.0;
  ClassId class_id = 0;
  ImageId image_id = 0;

  bool true_positive() const noexcept { return gt.has_value(); }
};

/// Greedy matching within one image and class. `dets` must be sorted by score
/// descending. Each detection takes the unmatched ground truth with the
/// highest IoU accepted by `rule` (lowest index on ties); otherwise it is a
/// false positive.
std::vector<MatchRecord> greedy_match(std::span<const ScoredBox> dets, std::span<const BBox> gts, IouRule rule,
                                      ClassId class_id = 0, ImageId image_id = 0);

/// 101-point interpolated AP. `records` must be sorted by score descending.
/// Empty optional when n_gt is zero: the class does not enter any mean.
std::optional<double> average_precision(std::span<const MatchRecord> records, std::size_t n_gt);

struct EvalOptions {
  std::size_t max_dets = 300;
  bool strict_iou = false;
};

struct ClassResult {
  ClassId class_id = 0;
  std::string name;
  bool known = false;
  std::size_t n_gt = 0;
  std::size_t n_det = 0;
  // Mean over the ten IoU thresholds, and AP at 0.5 alone.
  std::optional<double> ap;
  std::optional<double> ap50;
};

struct EvalReport {
  std::optional<double> ap_novel;
  std::optional<double> ap_known;
  std::optional<double> ap_all;
  std::optional<double> ap50_novel;
  std::optional<double> ap50_known;
  std::optional<double> ap50_all;
  std::optional<double> recall_05;
  std::size_t tp_count = 0;
  std::size_t gt_count = 0;
  std::size_t pred_count = 0;
  std::size_t max_dets = 0;
  std::vector<ClassResult> per_class;
  std::vector<std::string> warnings;
  std::vector<std::string> notes;
};

/// Keeps the `max_dets` highest-scoring detections of every image (stable on ties).
RefinedByImage truncate_per_image(const RefinedByImage& dets, std::size_t max_dets);

/// Per-class AP over the ten IoU thresholds after per-image truncation, then
/// means over classes with ground truth: known, novel, and all. Predictions
/// on images absent from the ground truth are ignored with a warning.
/// Throws InvariantError for a class id outside the vocabulary.
EvalReport grouped_map(const RefinedByImage& dets, const GroundTruthSet& gt, const ClassVocabulary& vocab,
                       const EvalOptions& options = {});

struct RecallResult {
  std::optional<double> recall;
  std::size_t tp = 0;
  std::size_t n_gt = 0;
  std::size_t n_pred = 0;
};

/// Class-agnostic greedy matching of predictions (score descending) to
/// ground-truth boxes in each image; recall = TP / n_gt.
RecallResult localization_recall(const RefinedByImage& dets, const GroundTruthSet& gt, IouRule rule);

/// Recall from counts, as a fraction.
std::optional<double> recall_from_counts(std::size_t tp, std::size_t n_gt) noexcept;

}  // namespace opennod
