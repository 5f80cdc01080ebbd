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

#include "stub_backend.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "opennod/codec.hpp"
#include "opennod/errors.hpp"

namespace opennod::stub {

namespace {

std::string box_key(const BBox& b) {
  return std::to_string(b.x1) + "," + std::to_string(b.y1) + "," + std::to_string(b.x2) + "," + std::to_string(b.y2);
}

// Uniform in [-1, 1) from the top 53 bits; identical on every platform.
double unit(std::mt19937_64& rng) { return 2.0 * static_cast<double>(rng() >> 11) * 0x1.0p-53 - 1.0; }

RleMask rasterize(const BBox& box, std::size_t height, std::size_t width) {
  BinaryMask mask(height, width);
  const auto lo = [](double v, std::size_t n) {
    return static_cast<std::size_t>(std::clamp(std::floor(v), 0.0, static_cast<double>(n)));
  };
  const auto hi = [](double v, std::size_t n) {
    return static_cast<std::size_t>(std::clamp(std::ceil(v), 0.0, static_cast<double>(n)));
  };
  for (std::size_t c = lo(box.x1, width); c < hi(box.x2, width); ++c) {
    for (std::size_t r = lo(box.y1, height); r < hi(box.y2, height); ++r) mask.set(r, c, true);
  }
  return encode_rle(mask);
}

}  // namespace

StubBackend::StubBackend(ClassVocabulary vocab, GroundTruthSet scene, StubOptions options)
    : vocab_(std::move(vocab)),
      scene_(std::move(scene)),
      options_(std::move(options)),
      dim_(std::max(options_.dim, vocab_.size() + 1)) {}

ClassId StubBackend::class_of_text(const std::string& text) const {
  ClassId best = -1;
  std::size_t best_len = 0;
  for (const auto& e : vocab_.entries()) {
    for (const auto& s : e.synonyms) {
      if (s.size() > best_len && text.find(s) != std::string::npos) {
        best = e.id;
        best_len = s.size();
      }
    }
  }
  return best;
}

Embedding StubBackend::axis_with_noise(std::size_t axis, const std::string& noise_key) const {
  std::mt19937_64 rng(options_.seed ^ codec::hash64(options_.model + "|" + noise_key));
  Embedding e(dim_);
  for (double& v : e) v = options_.noise * unit(rng);
  e[axis] += 1.0;
  return e;
}

const GroundTruthImage& StubBackend::image_or_throw(const ImageRef& image) const {
  if (options_.fail_images.count(image.id) != 0) {
    throw BackendError("stub: injected failure for image " + std::to_string(image.id));
  }
  const auto it = scene_.images.find(image.id);
  if (it == scene_.images.end()) throw BackendError("stub: unknown image " + std::to_string(image.id));
  return it->second;
}

std::vector<Embedding> StubBackend::text_embed(std::span<const std::string> texts) {
  std::vector<Embedding> out;
  out.reserve(texts.size());
  for (const auto& t : texts) {
    const ClassId c = class_of_text(t);
    out.push_back(axis_with_noise(c < 0 ? dim_ - 1 : static_cast<std::size_t>(c), "text:" + t));
  }
  return out;
}

std::vector<Embedding> StubBackend::image_embed_roi(const ImageRef& image, std::span<const BBox> boxes,
                                                    double context_pad) {
  const GroundTruthImage& img = image_or_throw(image);
  std::vector<Embedding> out;
  out.reserve(boxes.size());
  for (const auto& b : boxes) {
    const BBox roi{b.x1 - context_pad, b.y1 - context_pad, b.x2 + context_pad, b.y2 + context_pad};
    double best = 0.0;
    ClassId cls = -1;
    for (const auto& g : img.boxes) {
      const double v = iou(roi, g.box);
      if (v > best) {
        best = v;
        cls = g.class_id;
      }
    }
    const std::size_t axis = (best >= 0.5 && cls >= 0) ? static_cast<std::size_t>(cls) : dim_ - 1;
    out.push_back(axis_with_noise(axis, "roi:" + std::to_string(image.id) + ":" + box_key(b)));
  }
  return out;
}

std::vector<SegmentationResult> StubBackend::segment_boxes(const ImageRef& image, std::span<const BBox> boxes) {
  const GroundTruthImage& img = image_or_throw(image);
  const auto h = static_cast<std::size_t>(img.info.height);
  const auto w = static_cast<std::size_t>(img.info.width);
  std::vector<SegmentationResult> out;
  out.reserve(boxes.size());
  for (const auto& b : boxes) {
    double best = 0.0;
    const GroundTruthBox* match = nullptr;
    for (const auto& g : img.boxes) {
      const double v = iou(b, g.box);
      if (v > best) {
        best = v;
        match = &g;
      }
    }
    SegmentationResult r;
    if (match && best >= 0.3) {
      r.mask = rasterize(match->box, h, w);
      r.sam_score = 0.6 + 0.4 * best;
    } else if (b.width() < 1.0 || b.height() < 1.0) {
      r.mask = RleMask{h, w, {static_cast<std::uint32_t>(h * w)}};
      r.sam_score = 0.05;
    } else {
      r.mask = rasterize(b, h, w);
      std::mt19937_64 rng(options_.seed ^ codec::hash64("seg:" + std::to_string(image.id) + ":" + box_key(b)));
      r.sam_score = 0.3 + 0.1 * unit(rng);
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace opennod::stub
