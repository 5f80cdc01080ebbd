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

#include "opennod/evaluation.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "opennod/errors.hpp"

namespace opennod {

std::array<double, kNumIouThresholds> iou_thresholds() noexcept {
  std::array<double, kNumIouThresholds> t{};
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(50 + 5 * i) / 100.0;
  return t;
}

namespace {

// Index order of `scores` descending, stable.
template <class T, class Score>
std::vector<std::size_t> order_by_score(const std::vector<T>& items, Score score) {
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return score(items[a]) > score(items[b]); });
  return order;
}

// Greedy matching against a precomputed IoU table (row per detection).
std::vector<std::optional<std::size_t>> match_with_table(const std::vector<double>& ious, std::size_t n_det,
                                                         std::size_t n_gt, IouRule rule) {
  std::vector<std::optional<std::size_t>> out(n_det);
  std::vector<bool> taken(n_gt, false);
  for (std::size_t d = 0; d < n_det; ++d) {
    std::optional<std::size_t> best;
    double best_iou = 0.0;
    for (std::size_t g = 0; g < n_gt; ++g) {
      if (taken[g]) continue;
      const double v = ious[d * n_gt + g];
      if (!rule.accepts(v)) continue;
      if (!best || v > best_iou) {
        best = g;
        best_iou = v;
      }
    }
    if (best) {
      taken[*best] = true;
      out[d] = best;
    }
  }
  return out;
}

double mean(const std::vector<double>& values) {
  double s = 0.0;
  for (const double v : values) s += v;
  return s / static_cast<double>(values.size());
}

std::optional<double> mean_or_none(const std::vector<double>& values) {
  if (values.empty()) return std::nullopt;
  return mean(values);
}

}  // namespace

std::vector<MatchRecord> greedy_match(std::span<const ScoredBox> dets, std::span<const BBox> gts, IouRule rule,
                                      ClassId class_id, ImageId image_id) {
  std::vector<double> table(dets.size() * gts.size());
  for (std::size_t d = 0; d < dets.size(); ++d) {
    for (std::size_t g = 0; g < gts.size(); ++g) table[d * gts.size() + g] = iou(dets[d].box, gts[g]);
  }
  const auto matches = match_with_table(table, dets.size(), gts.size(), rule);
  std::vector<MatchRecord> out(dets.size());
  for (std::size_t d = 0; d < dets.size(); ++d) {
    out[d].detection = d;
    out[d].gt = matches[d];
    out[d].iou = matches[d] ? table[d * gts.size() + *matches[d]] : 0.0;
    out[d].score = dets[d].score;
    out[d].class_id = class_id;
    out[d].image_id = image_id;
  }
  return out;
}

std::optional<double> average_precision(std::span<const MatchRecord> records, std::size_t n_gt) {
  if (n_gt == 0) return std::nullopt;
  const std::size_t n = records.size();
  std::vector<double> recall(n);
  std::vector<double> precision(n);
  std::size_t tp = 0;
  for (std::size_t k = 0; k < n; ++k) {
    if (records[k].true_positive()) ++tp;
    recall[k] = static_cast<double>(tp) / static_cast<double>(n_gt);
    precision[k] = static_cast<double>(tp) / static_cast<double>(k + 1);
  }
  for (std::size_t k = n; k-- > 1;) precision[k - 1] = std::max(precision[k - 1], precision[k]);
  double sum = 0.0;
  for (std::size_t i = 0; i < kNumRecallPoints; ++i) {
    const double r = static_cast<double>(i) / 100.0;
    const auto it = std::lower_bound(recall.begin(), recall.end(), r);
    if (it != recall.end()) sum += precision[static_cast<std::size_t>(it - recall.begin())];
  }
  return sum / static_cast<double>(kNumRecallPoints);
}

std::optional<double> recall_from_counts(std::size_t tp, std::size_t n_gt) noexcept {
  if (n_gt == 0) return std::nullopt;
  return static_cast<double>(tp) / static_cast<double>(n_gt);
}

RefinedByImage truncate_per_image(const RefinedByImage& dets, std::size_t max_dets) {
  RefinedByImage out;
  for (const auto& [image, list] : dets) {
    const auto order = order_by_score(list, [](const RefinedDetection& d) { return d.score; });
    auto& kept = out[image];
    for (std::size_t k = 0; k < std::min(max_dets, order.size()); ++k) kept.push_back(list[order[k]]);
  }
  return out;
}

EvalReport grouped_map(const RefinedByImage& dets, const GroundTruthSet& gt, const ClassVocabulary& vocab,
                       const EvalOptions& options) {
  if (options.max_dets == 0) throw InvariantError("grouped_map: max_dets must be positive");
  for (const auto& [image, list] : dets) {
    for (const auto& d : list) {
      if (!vocab.contains(d.class_id)) {
        throw InvariantError("prediction on image " + std::to_string(image) + " has class_id " +
                             std::to_string(d.class_id) + " which is not in the vocabulary");
      }
    }
  }

  EvalReport report;
  report.max_dets = options.max_dets;
  RefinedByImage evaluated;
  for (const auto& [image, list] : dets) {
    if (gt.images.count(image) == 0) {
      report.warnings.push_back("image " + std::to_string(image) + " has predictions but no ground-truth entry");
    } else {
      evaluated.emplace(image, list);
    }
  }
  evaluated = truncate_per_image(evaluated, options.max_dets);

  const std::size_t n_classes = vocab.size();
  const auto thresholds = iou_thresholds();

  // Per (class, image): detections in score order and ground-truth boxes.
  struct Cell {
    ImageId image = 0;
    std::vector<ScoredBox> dets;
    std::vector<BBox> gts;
    std::vector<double> ious;
  };
  std::vector<std::map<ImageId, Cell>> cells(n_classes);
  for (const auto& [image, img] : gt.images) {
    for (const auto& b : img.boxes) {
      if (!vocab.contains(b.class_id)) {
        throw InvariantError("ground truth on image " + std::to_string(image) + " has class_id " +
                             std::to_string(b.class_id) + " which is not in the vocabulary");
      }
      Cell& c = cells[static_cast<std::size_t>(b.class_id)][image];
      c.image = image;
      c.gts.push_back(b.box);
    }
  }
  for (const auto& [image, list] : evaluated) {
    for (const auto& d : list) {
      Cell& c = cells[static_cast<std::size_t>(d.class_id)][image];
      c.image = image;
      c.dets.push_back(ScoredBox{d.box, d.score});
    }
  }

  std::vector<double> ap_known, ap_novel, ap_all, ap50_known, ap50_novel, ap50_all;
  for (std::size_t cls = 0; cls < n_classes; ++cls) {
    const ClassEntry& entry = vocab.entries()[cls];
    ClassResult result{entry.id, entry.name, entry.known, 0, 0, std::nullopt, std::nullopt};
    // Global ranking: score descending, ties by image id then per-image rank.
    struct Ranked {
      double score;
      const Cell* cell;
      std::size_t local;
    };
    std::vector<Ranked> ranked;
    for (auto& [image, cell] : cells[cls]) {
      result.n_gt += cell.gts.size();
      const auto order = order_by_score(cell.dets, [](const ScoredBox& s) { return s.score; });
      std::vector<ScoredBox> sorted;
      sorted.reserve(order.size());
      for (const std::size_t i : order) sorted.push_back(cell.dets[i]);
      cell.dets = std::move(sorted);
      cell.ious.resize(cell.dets.size() * cell.gts.size());
      for (std::size_t d = 0; d < cell.dets.size(); ++d) {
        for (std::size_t g = 0; g < cell.gts.size(); ++g) {
          cell.ious[d * cell.gts.size() + g] = iou(cell.dets[d].box, cell.gts[g]);
        }
        ranked.push_back(Ranked{cell.dets[d].score, &cell, d});
      }
    }
    result.n_det = ranked.size();
    std::stable_sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) { return a.score > b.score; });

    if (result.n_gt > 0) {
      std::vector<double> per_threshold;
      for (std::size_t t = 0; t < thresholds.size(); ++t) {
        const IouRule rule{thresholds[t], options.strict_iou};
        std::map<const Cell*, std::vector<std::optional<std::size_t>>> matches;
        for (const auto& [image, cell] : cells[cls]) {
          matches[&cell] = match_with_table(cell.ious, cell.dets.size(), cell.gts.size(), rule);
        }
        std::vector<MatchRecord> records(ranked.size());
        for (std::size_t k = 0; k < ranked.size(); ++k) {
          records[k].detection = k;
          records[k].gt = matches[ranked[k].cell][ranked[k].local];
          records[k].score = ranked[k].score;
          records[k].class_id = entry.id;
          records[k].image_id = ranked[k].cell->image;
        }
        per_threshold.push_back(*average_precision(records, result.n_gt));
      }
      result.ap = mean(per_threshold);
      result.ap50 = per_threshold.front();
      (entry.known ? ap_known : ap_novel).push_back(*result.ap);
      (entry.known ? ap50_known : ap50_novel).push_back(*result.ap50);
      ap_all.push_back(*result.ap);
      ap50_all.push_back(*result.ap50);
    }
    report.per_class.push_back(std::move(result));
  }

  report.ap_known = mean_or_none(ap_known);
  report.ap_novel = mean_or_none(ap_novel);
  report.ap_all = mean_or_none(ap_all);
  report.ap50_known = mean_or_none(ap50_known);
  report.ap50_novel = mean_or_none(ap50_novel);
  report.ap50_all = mean_or_none(ap50_all);

  const RecallResult rec = localization_recall(evaluated, gt, IouRule{0.5, options.strict_iou});
  report.recall_05 = rec.recall;
  report.tp_count = rec.tp;
  report.gt_count = rec.n_gt;
  report.pred_count = rec.n_pred;
  if (report.pred_count == 0) report.notes.push_back("no predictions");
  if (ap_novel.empty()) report.notes.push_back("no novel class has ground truth; novel AP undefined");
  if (ap_known.empty()) report.notes.push_back("no known class has ground truth; known AP undefined");
  return report;
}

RecallResult localization_recall(const RefinedByImage& dets, const GroundTruthSet& gt, IouRule rule) {
  if (!(rule.threshold > 0.0 && rule.threshold < 1.0)) {
    throw InvariantError("localization_recall: IoU threshold must lie in (0, 1)");
  }
  RecallResult out;
  out.n_gt = gt.box_count();
  for (const auto& [image, list] : dets) {
    const auto it = gt.images.find(image);
    if (it == gt.images.end()) continue;
    out.n_pred += list.size();
    std::vector<ScoredBox> scored;
    scored.reserve(list.size());
    for (const std::size_t i : order_by_score(list, [](const RefinedDetection& d) { return d.score; })) {
      scored.push_back(ScoredBox{list[i].box, list[i].score});
    }
    std::vector<BBox> gts;
    gts.reserve(it->second.boxes.size());
    for (const auto& b : it->second.boxes) gts.push_back(b.box);
    for (const auto& m : greedy_match(scored, gts, rule, 0, image)) {
      if (m.true_positive()) ++out.tp;
    }
  }
  out.recall = recall_from_counts(out.tp, out.n_gt);
  return out;
}

}  // namespace opennod
