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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "opennod/backend.hpp"
#include "opennod/embedding.hpp"
#include "opennod/errors.hpp"
#include "opennod/geometry.hpp"
#include "opennod/vocabulary.hpp"

namespace opennod {

/// Synonym feature: the mean of the L2-normalized prompt embeddings,
/// accumulated in input order. Throws InvariantError on an empty list, a
/// dimension mismatch, or a zero vector.
Embedding synonym_feature(std::span<const Embedding> per_prompt_embeddings);

/// Class feature: the mean of the L2-normalized synonym features. Not
/// re-normalized, so its norm is at most 1.
Embedding class_feature(std::span<const Embedding> synonym_features);

/// d x |C| text feature matrix; column i belongs to class id i.
class ClassTextMatrix {
 public:
  ClassTextMatrix() = default;
  ClassTextMatrix(std::size_t dim, std::vector<Embedding> columns, std::uint64_t vocabulary_hash);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return columns_.size(); }
  std::span<const double> column(std::size_t i) const { return columns_.at(i); }
  const std::vector<Embedding>& columns() const noexcept { return columns_; }
  std::uint64_t vocabulary_hash() const noexcept { return vocabulary_hash_; }

 private:
  std::size_t dim_ = 0;
  std::vector<Embedding> columns_;
  std::uint64_t vocabulary_hash_ = 0;
};

struct MatrixBuildOptions {
  // Off: one prompt (first template) of the first synonym per class.
  bool use_saeg = true;
};

/// Raised when the backend fails part-way through a matrix build.
class MatrixBuildError : public BackendError {
 public:
  MatrixBuildError(const std::string& what, std::size_t classes_done, std::size_t classes_total)
      : BackendError(what), classes_done_(classes_done), classes_total_(classes_total) {}
  std::size_t classes_done() const noexcept { return classes_done_; }
  std::size_t classes_total() const noexcept { return classes_total_; }

 private:
  std::size_t classes_done_;
  std::size_t classes_total_;
};

/// One text_embed call per synonym over all rendered templates, then
/// synonym_feature and class_feature, assembled in class id order.
ClassTextMatrix build_class_matrix(const ClassVocabulary& vocab, const PromptTemplateSet& templates, Backend& backend,
                                   const MatrixBuildOptions& options = {});

enum class ConfidenceMode {
  Softmax,  // softmax(cosines / temperature) at the argmax
  Cosine,   // the winning cosine, clipped to [0, 1]
};

struct ClassifyOptions {
  double temperature = 0.01;
  ConfidenceMode mode = ConfidenceMode::Softmax;
  // Classes eligible for the argmax; empty means every class.
  std::vector<bool> allowed;
};

struct Classification {
  ClassId class_id = 0;
  double confidence = 0.0;
};

/// Cosine logits against every column; ties go to the lower class id.
Classification classify_embedding(std::span<const double> image_embedding, const ClassTextMatrix& matrix,
                                  const ClassifyOptions& options = {});

struct ImageSize {
  double width = 0.0;
  double height = 0.0;
};

/// Labels classless BG detections by zero-shot classification of their ROI
/// embeddings. Boxes are clamped to the image first; output order and source
/// tag are preserved.
std::vector<LabeledDetection> label_background(std::span<const RawDetection> detections, const ImageRef& image,
                                               ImageSize size, const ClassTextMatrix& matrix, Backend& backend,
                                               const ClassifyOptions& options = {}, double context_pad = 0.0);

// class_matrix.bin: little-endian header
//   char[4] "ONCM", u32 version, u32 d, u32 |C|, u64 vocabulary_hash, u64 cache_key
// followed by |C| columns of d float32 values (column-major).
struct MatrixFileHeader {
  std::uint32_t dim = 0;
  std::uint32_t count = 0;
  std::uint64_t vocabulary_hash = 0;
  std::uint64_t cache_key = 0;
};

void write_class_matrix(const std::filesystem::path& path, const ClassTextMatrix& matrix, std::uint64_t cache_key);
/// Empty optional when the file is missing or its header is unreadable.
std::optional<MatrixFileHeader> read_class_matrix_header(const std::filesystem::path& path);
ClassTextMatrix read_class_matrix(const std::filesystem::path& path, MatrixFileHeader* header = nullptr);

}  // namespace opennod
