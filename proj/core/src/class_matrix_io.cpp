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

#include <cstring>
#include <fstream>

#include "opennod/saeg.hpp"

namespace opennod {

namespace {

constexpr char kMagic[4] = {'O', 'N', 'C', 'M'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
bool get(std::istream& in, T& value) {
  return static_cast<bool>(in.read(reinterpret_cast<char*>(&value), sizeof(T)));
}

std::optional<MatrixFileHeader> read_header(std::istream& in) {
  char magic[4];
  std::uint32_t version = 0;
  MatrixFileHeader h;
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(magic)) != 0) return std::nullopt;
  if (!get(in, version) || version != kVersion) return std::nullopt;
  if (!get(in, h.dim) || !get(in, h.count) || !get(in, h.vocabulary_hash) || !get(in, h.cache_key)) {
    return std::nullopt;
  }
  return h;
}

}  // namespace

void write_class_matrix(const std::filesystem::path& path, const ClassTextMatrix& matrix, std::uint64_t cache_key) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  // Write to a sibling and rename so readers never observe a partial file.
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write class matrix to " + tmp.string());
    out.write(kMagic, sizeof(kMagic));
    put(out, kVersion);
    put(out, static_cast<std::uint32_t>(matrix.dim()));
    put(out, static_cast<std::uint32_t>(matrix.size()));
    put(out, matrix.vocabulary_hash());
    put(out, cache_key);
    for (const auto& col : matrix.columns()) {
      for (const double v : col) put(out, static_cast<float>(v));
    }
    if (!out) throw Error("failed while writing class matrix " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::optional<MatrixFileHeader> read_class_matrix_header(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  return read_header(in);
}

ClassTextMatrix read_class_matrix(const std::filesystem::path& path, MatrixFileHeader* header) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string(), 0, "", "cannot open class matrix");
  const auto h = read_header(in);
  if (!h) throw ParseError(path.string(), 0, "header", "not a class matrix file (bad magic or version)");
  std::vector<Embedding> columns(h->count, Embedding(h->dim));
  for (auto& col : columns) {
    for (double& v : col) {
      float f;
      if (!get(in, f)) throw ParseError(path.string(), 0, "data", "file is truncated");
      v = f;
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw ParseError(path.string(), 0, "data", "trailing bytes after the last column");
  }
  if (header) *header = *h;
  return ClassTextMatrix(h->dim, std::move(columns), h->vocabulary_hash);
}

}  // namespace opennod
