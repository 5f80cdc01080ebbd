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

#include "opennod/saeg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace opennod {

namespace {

Embedding normalized_mean(std::span<const Embedding> vectors, const char* what) {
  if (vectors.empty()) throw InvariantError(std::string(what) + ": empty input");
  const std::size_t d = vectors.front().size();
  if (d == 0) throw InvariantError(std::string(what) + ": zero-dimensional embedding");
  Embedding acc(d, 0.0);
  for (std::size_t k = 0; k < vectors.size(); ++k) {
    const Embedding& e = vectors[k];
    if (e.size() != d) {
      throw InvariantError(std::string(what) + ": dimension " + std::to_string(e.size()) + " at index " +
                           std::to_string(k) + " differs from " + std::to_string(d));
    }
    const double n = l2_norm(e);
    if (!(n > 0.0) || !std::isfinite(n)) {
      throw InvariantError(std::string(what) + ": cannot normalize zero or non-finite vector at index " +
                           std::to_string(k));
    }
    for (std::size_t i = 0; i < d; ++i) acc[i] += e[i] / n;
  }
  const double count = static_cast<double>(vectors.size());
  for (double& v : acc) v /= count;
  return acc;
}

}  // namespace

Embedding synonym_feature(std::span<const Embedding> per_prompt_embeddings) {
  return normalized_mean(per_prompt_embeddings, "synonym_feature");
}

Embedding class_feature(std::span<const Embedding> synonym_features) {
  return normalized_mean(synonym_features, "class_feature");
}

ClassTextMatrix::ClassTextMatrix(std::size_t dim, std::vector<Embedding> columns, std::uint64_t vocabulary_hash)
    : dim_(dim), columns_(std::move(columns)), vocabulary_hash_(vocabulary_hash) {
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (columns_[i].size() != dim_) {
      throw InvariantError("class matrix column " + std::to_string(i) + " has dimension " +
                           std::to_string(columns_[i].size()) + ", expected " + std::to_string(dim_));
    }
  }
}

ClassTextMatrix build_class_matrix(const ClassVocabulary& vocab, const PromptTemplateSet& templates, Backend& backend,
                                   const MatrixBuildOptions& options) {
  const std::size_t total = vocab.size();
  std::vector<Embedding> columns;
  columns.reserve(total);
  std::size_t dim = 0;
  for (const ClassEntry& entry : vocab.entries()) {
    const std::size_t n_syn = options.use_saeg ? entry.synonyms.size() : 1;
    std::vector<Embedding> syn_features;
    syn_features.reserve(n_syn);
    for (std::size_t s = 0; s < n_syn; ++s) {
      const std::string& synonym = entry.synonyms[s];
      std::vector<std::string> prompts =
          options.use_saeg ? templates.render_all(synonym) : std::vector<std::string>{templates.render(0, synonym)};
      std::vector<Embedding> embeddings;
      try {
        embeddings = backend.text_embed(prompts);
      } catch (const std::exception& e) {
        throw MatrixBuildError("text embedding failed for class " + std::to_string(entry.id) + " (\"" + synonym +
                                   "\") after " + std::to_string(columns.size()) + "/" + std::to_string(total) +
                                   " classes: " + e.what(),
                               columns.size(), total);
      }
      if (embeddings.size() != prompts.size()) {
        throw MatrixBuildError("backend returned " + std::to_string(embeddings.size()) + " embeddings for " +
                                   std::to_string(prompts.size()) + " prompts",
                               columns.size(), total);
      }
      for (const auto& e : embeddings) {
        if (dim == 0) dim = e.size();
        if (e.size() != dim) {
          throw MatrixBuildError("embedding dimension drifted from " + std::to_string(dim) + " to " +
                                     std::to_string(e.size()) + " at class " + std::to_string(entry.id),
                                 columns.size(), total);
        }
      }
      syn_features.push_back(synonym_feature(embeddings));
    }
    columns.push_back(class_feature(syn_features));
  }
  return ClassTextMatrix(dim, std::move(columns), vocab.hash());
}

Classification classify_embedding(std::span<const double> image_embedding, const ClassTextMatrix& matrix,
                                  const ClassifyOptions& options) {
  if (image_embedding.size() != matrix.dim()) {
    throw InvariantError("image embedding dimension " + std::to_string(image_embedding.size()) +
                         " does not match class matrix dimension " + std::to_string(matrix.dim()));
  }
  if (!(options.temperature > 0.0)) throw InvariantError("temperature must be positive");
  if (!options.allowed.empty() && options.allowed.size() != matrix.size()) {
    throw InvariantError("allowed-class mask size does not match the class matrix");
  }
  const double img_norm = l2_norm(image_embedding);
  if (!(img_norm > 0.0) || !std::isfinite(img_norm)) {
    throw InvariantError("cannot classify a zero or non-finite image embedding");
  }

  std::vector<double> cosines(matrix.size(), 0.0);
  std::size_t best = matrix.size();
  for (std::size_t i = 0; i < matrix.size(); ++i) {
    if (!options.allowed.empty() && !options.allowed[i]) continue;
    const auto col = matrix.column(i);
    const double col_norm = l2_norm(col);
    cosines[i] = col_norm > 0.0 ? dot(image_embedding, col) / (img_norm * col_norm) : 0.0;
    if (best == matrix.size() || cosines[i] > cosines[best]) best = i;
  }
  if (best == matrix.size()) throw InvariantError("no class is eligible for classification");

  Classification out{static_cast<ClassId>(best), 0.0};
  if (options.mode == ConfidenceMode::Cosine) {
    out.confidence = std::clamp(cosines[best], 0.0, 1.0);
    return out;
  }
  double denom = 0.0;
  for (std::size_t i = 0; i < matrix.size(); ++i) {
    if (!options.allowed.empty() && !options.allowed[i]) continue;
    denom += std::exp((cosines[i] - cosines[best]) / options.temperature);
  }
  out.confidence = 1.0 / denom;
  return out;
}

std::vector<LabeledDetection> label_background(std::span<const RawDetection> detections, const ImageRef& image,
                                               ImageSize size, const ClassTextMatrix& matrix, Backend& backend,
                                               const ClassifyOptions& options, double context_pad) {
  if (detections.empty()) return {};
  std::vector<BBox> boxes;
  boxes.reserve(detections.size());
  for (const auto& d : detections) {
    if (d.source != SourceTag::BG) throw InvariantError("label_background received a non-BG detection");
    boxes.push_back(clamp_to_image(d.box, size.width, size.height));
  }
  const auto embeddings = backend.image_embed_roi(image, boxes, context_pad);
  if (embeddings.size() != boxes.size()) {
    throw BackendError("backend returned " + std::to_string(embeddings.size()) + " ROI embeddings for " +
                       std::to_string(boxes.size()) + " boxes");
  }
  std::vector<LabeledDetection> out;
  out.reserve(boxes.size());
  for (std::size_t k = 0; k < boxes.size(); ++k) {
    const Classification c = classify_embedding(embeddings[k], matrix, options);
    out.push_back(LabeledDetection{boxes[k], c.class_id, c.confidence, SourceTag::BG});
  }
  return out;
}

}  // namespace opennod
