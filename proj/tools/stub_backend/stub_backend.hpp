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

// Deterministic stand-in for the model service. Text prompts embed near the
// one-hot axis of the class whose synonym they mention; ROIs embed near the
// axis of the ground-truth object they overlap; box prompts segment to the
// overlapped ground-truth box. Everything is a pure function of the inputs.

#include <cstdint>
#include <set>
#include <string>

#include "opennod/backend.hpp"
#include "opennod/detection_io.hpp"
#include "opennod/vocabulary.hpp"

namespace opennod::stub {

struct StubOptions {
  std::size_t dim = 16;
  double noise = 0.2;
  std::uint64_t seed = 7;
  std::string model = "stub-v1";
  // Images whose requests fail with an error.
  std::set<ImageId> fail_images;
};

class StubBackend final : public Backend {
 public:
  StubBackend(ClassVocabulary vocab, GroundTruthSet scene, StubOptions options = {});

  std::size_t dim() override { return dim_; }
  std::string model_name() override { return options_.model; }
  std::vector<Embedding> text_embed(std::span<const std::string> texts) override;
  std::vector<Embedding> image_embed_roi(const ImageRef& image, std::span<const BBox> boxes,
                                         double context_pad) override;
  std::vector<SegmentationResult> segment_boxes(const ImageRef& image, std::span<const BBox> boxes) override;

  /// Class whose longest synonym occurs in `text`, or -1.
  ClassId class_of_text(const std::string& text) const;

 private:
  const GroundTruthImage& image_or_throw(const ImageRef& image) const;
  Embedding axis_with_noise(std::size_t axis, const std::string& noise_key) const;

  ClassVocabulary vocab_;
  GroundTruthSet scene_;
  StubOptions options_;
  std::size_t dim_;
};

}  // namespace opennod::stub
