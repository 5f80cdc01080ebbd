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

#include "opennod/vocabulary.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "json_util.hpp"
#include "opennod/codec.hpp"
#include "opennod/errors.hpp"

namespace opennod {

using detail::json;
using detail::JsonContext;

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string(), 0, "", "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ClassVocabulary ClassVocabulary::from_entries(std::vector<ClassEntry> entries, std::string_view source) {
  const JsonContext ctx{std::string(source), 0};
  std::stable_sort(entries.begin(), entries.end(),
                   [](const ClassEntry& a, const ClassEntry& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < entries.size(); ++i) {
    ClassEntry& e = entries[i];
    if (i > 0 && entries[i - 1].id == e.id) {
      ctx.fail("classes", "duplicate class_id " + std::to_string(e.id));
    }
    if (e.id != static_cast<ClassId>(i)) {
      ctx.fail("classes", "class ids must be dense 0.." + std::to_string(entries.size() - 1) +
                              "; found id " + std::to_string(e.id) + " at position " + std::to_string(i));
    }
    if (e.name.empty()) ctx.fail("classes[" + std::to_string(i) + "].name", "empty class name");
    // Name first, then the remaining synonyms once each in file order.
    std::vector<std::string> syn{e.name};
    for (auto& s : e.synonyms) {
      if (s.empty()) ctx.fail("classes[" + std::to_string(i) + "].synonyms", "empty synonym");
      if (std::find(syn.begin(), syn.end(), s) == syn.end()) syn.push_back(std::move(s));
    }
    e.synonyms = std::move(syn);
  }
  ClassVocabulary v;
  v.entries_ = std::move(entries);
  if (!v.entries_.empty() && v.known_count() == 0) ctx.fail("classes", "no class is marked known");
  if (v.entries_.empty()) ctx.fail("classes", "vocabulary is empty");
  return v;
}

const ClassEntry& ClassVocabulary::at(ClassId id) const {
  if (!contains(id)) throw InvariantError("class_id " + std::to_string(id) + " is not in the vocabulary");
  return entries_[static_cast<std::size_t>(id)];
}

std::size_t ClassVocabulary::known_count() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(entries_.begin(), entries_.end(), [](const ClassEntry& e) { return e.known; }));
}

std::string ClassVocabulary::to_json() const {
  json classes = json::array();
  for (const auto& e : entries_) {
    classes.push_back({{"id", e.id}, {"name", e.name}, {"synonyms", e.synonyms}, {"known", e.known}});
  }
  return json{{"classes", classes}}.dump();
}

std::uint64_t ClassVocabulary::hash() const { return codec::hash64(to_json()); }

ClassVocabulary parse_vocabulary(std::string_view json_text, std::string_view source) {
  const JsonContext ctx{std::string(source), 0};
  const json doc = detail::parse_json_text(json_text, ctx);
  const json& classes = detail::require(doc, "classes", "", ctx);
  if (!classes.is_array()) ctx.fail("classes", "expected an array");
  std::vector<ClassEntry> entries;
  entries.reserve(classes.size());
  for (std::size_t i = 0; i < classes.size(); ++i) {
    const std::string path = "classes[" + std::to_string(i) + "]";
    const json& c = classes[i];
    ClassEntry e;
    const std::int64_t id = detail::as_integer(detail::require(c, "id", path, ctx), path + ".id", ctx);
    if (id < 0 || id > std::numeric_limits<ClassId>::max()) ctx.fail(path + ".id", "out of range");
    e.id = static_cast<ClassId>(id);
    e.name = detail::as_string(detail::require(c, "name", path, ctx), path + ".name", ctx);
    e.known = detail::as_bool(detail::require(c, "known", path, ctx), path + ".known", ctx);
    if (const auto it = c.find("synonyms"); it != c.end()) {
      if (!it->is_array()) ctx.fail(path + ".synonyms", "expected an array of strings");
      for (std::size_t k = 0; k < it->size(); ++k) {
        e.synonyms.push_back(detail::as_string((*it)[k], path + ".synonyms[" + std::to_string(k) + "]", ctx));
      }
    }
    entries.push_back(std::move(e));
  }
  return ClassVocabulary::from_entries(std::move(entries), source);
}

ClassVocabulary load_vocabulary(const std::filesystem::path& path) {
  return parse_vocabulary(read_text_file(path), path.string());
}

namespace {

std::size_t count_placeholders(std::string_view t) {
  std::size_t n = 0;
  for (std::size_t pos = t.find(kClassPlaceholder); pos != std::string_view::npos;
       pos = t.find(kClassPlaceholder, pos + kClassPlaceholder.size())) {
    ++n;
  }
  return n;
}

}  // namespace

PromptTemplateSet::PromptTemplateSet(std::vector<std::string> templates) : templates_(std::move(templates)) {
  if (templates_.empty()) throw InvariantError("prompt template set is empty");
  for (const auto& t : templates_) {
    if (count_placeholders(t) != 1) {
      throw InvariantError("template \"" + t + "\" must contain [CLASS] exactly once");
    }
  }
}

std::string PromptTemplateSet::render(std::size_t index, std::string_view label) const {
  std::string out = templates_.at(index);
  out.replace(out.find(kClassPlaceholder), kClassPlaceholder.size(), label);
  return out;
}

std::vector<std::string> PromptTemplateSet::render_all(std::string_view label) const {
  std::vector<std::string> out;
  out.reserve(templates_.size());
  for (std::size_t i = 0; i < templates_.size(); ++i) out.push_back(render(i, label));
  return out;
}

std::uint64_t PromptTemplateSet::hash() const { return codec::hash64(json(templates_).dump()); }

PromptTemplateSet parse_templates(std::string_view json_text, std::string_view source) {
  const JsonContext ctx{std::string(source), 0};
  const json doc = detail::parse_json_text(json_text, ctx);
  const json& arr = doc.is_object() ? detail::require(doc, "templates", "", ctx) : doc;
  if (!arr.is_array()) ctx.fail("templates", "expected an array of strings");
  std::vector<std::string> templates;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string path = "templates[" + std::to_string(i) + "]";
    std::string t = detail::as_string(arr[i], path, ctx);
    if (count_placeholders(t) != 1) ctx.fail(path, "must contain [CLASS] exactly once");
    templates.push_back(std::move(t));
  }
  if (templates.empty()) ctx.fail("templates", "at least one template is required");
  return PromptTemplateSet(std::move(templates));
}

PromptTemplateSet load_templates(const std::filesystem::path& path) {
  return parse_templates(read_text_file(path), path.string());
}

}  // namespace opennod
