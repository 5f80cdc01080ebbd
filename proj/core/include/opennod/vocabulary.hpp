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
#include <string>
#include <string_view>
#include <vector>

#include "opennod/geometry.hpp"

namespace opennod {

struct ClassEntry {
  ClassId id = 0;
  std::string name;
  // Never empty; the first synonym is the class name.
  std::vector<std::string> synonyms;
  bool known = false;
};

/// Ordered class list with dense ids 0..size()-1.
class ClassVocabulary {
 public:
  ClassVocabulary() = default;

  /// Validates and normalizes: entries are sorted by id, ids must be dense and
  /// unique, the name is moved to the front of its synonym list, repeated
  /// synonyms are dropped, and at least one class must be known.
  static ClassVocabulary from_entries(std::vector<ClassEntry> entries, std::string_view source = "vocabulary");

  std::size_t size() const noexcept { return entries_.size(); }
  const std::vector<ClassEntry>& entries() const noexcept { return entries_; }
  const ClassEntry& at(ClassId id) const;
  bool contains(ClassId id) const noexcept { return id >= 0 && static_cast<std::size_t>(id) < entries_.size(); }
  std::size_t known_count() const noexcept;
  std::size_t novel_count() const noexcept { return size() - known_count(); }

  /// Content hash over ids, names, synonyms, and known flags.
  std::uint64_t hash() const;

  std::string to_json() const;

 private:
  std::vector<ClassEntry> entries_;
};

ClassVocabulary parse_vocabulary(std::string_view json_text, std::string_view source = "vocab.json");
ClassVocabulary load_vocabulary(const std::filesystem::path& path);

inline constexpr std::string_view kClassPlaceholder = "[CLASS]";

/// Prompt templates, each containing the [CLASS] placeholder exactly once.
class PromptTemplateSet {
 public:
  PromptTemplateSet() = default;
  explicit PromptTemplateSet(std::vector<std::string> templates);

  std::size_t size() const noexcept { return templates_.size(); }
  const std::vector<std::string>& templates() const noexcept { return templates_; }

  /// Substitutes `label` into template `index`.
  std::string render(std::size_t index, std::string_view label) const;
  /// All templates rendered for one label, in template order.
  std::vector<std::string> render_all(std::string_view label) const;

  std::uint64_t hash() const;

 private:
  std::vector<std::string> templates_;
};

/// Accepts {"templates": [...]} or a bare JSON array of strings.
PromptTemplateSet parse_templates(std::string_view json_text, std::string_view source = "templates.json");
PromptTemplateSet load_templates(const std::filesystem::path& path);

/// Reads a whole file; throws ParseError naming the path when it cannot be opened.
std::string read_text_file(const std::filesystem::path& path);

}  // namespace opennod
