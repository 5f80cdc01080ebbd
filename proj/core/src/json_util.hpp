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

// Field accessors that turn nlohmann type errors into ParseError with a
// source location and field path.

#include <json.hpp>

#include <string>

#include "opennod/errors.hpp"
#include "opennod/geometry.hpp"

namespace opennod::detail {

using nlohmann::json;

struct JsonContext {
  std::string source;
  std::size_t line = 0;

  [[noreturn]] void fail(const std::string& field, const std::string& what) const {
    throw ParseError(source, line, field, what);
  }
};

inline json parse_json_text(std::string_view text, const JsonContext& ctx) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    ctx.fail("", std::string("invalid JSON: ") + e.what());
  }
}

inline const json& require(const json& obj, const char* key, const std::string& path,
                           const JsonContext& ctx) {
  if (!obj.is_object()) ctx.fail(path, "expected an object");
  const auto it = obj.find(key);
  if (it == obj.end()) ctx.fail(path.empty() ? key : path + "." + key, "missing required field");
  return *it;
}

inline std::string join_path(const std::string& path, const char* key) {
  return path.empty() ? std::string(key) : path + "." + key;
}

inline double as_number(const json& v, const std::string& path, const JsonContext& ctx) {
  if (!v.is_number()) ctx.fail(path, "expected a number");
  return v.get<double>();
}

inline std::int64_t as_integer(const json& v, const std::string& path, const JsonContext& ctx) {
  if (!v.is_number_integer()) ctx.fail(path, "expected an integer");
  return v.get<std::int64_t>();
}

inline std::string as_string(const json& v, const std::string& path, const JsonContext& ctx) {
  if (!v.is_string()) ctx.fail(path, "expected a string");
  return v.get<std::string>();
}

inline bool as_bool(const json& v, const std::string& path, const JsonContext& ctx) {
  if (!v.is_boolean()) ctx.fail(path, "expected a boolean");
  return v.get<bool>();
}

inline BBox as_box(const json& v, const std::string& path, const JsonContext& ctx) {
  if (!v.is_array() || v.size() != 4) ctx.fail(path, "expected [x1, y1, x2, y2]");
  BBox b{as_number(v[0], path + "[0]", ctx), as_number(v[1], path + "[1]", ctx),
         as_number(v[2], path + "[2]", ctx), as_number(v[3], path + "[3]", ctx)};
  if (!b.valid()) ctx.fail(path, "box has x2 < x1 or y2 < y1");
  return b;
}

inline json box_to_json(const BBox& b) { return json::array({b.x1, b.y1, b.x2, b.y2}); }

}  // namespace opennod::detail
