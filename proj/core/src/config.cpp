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

#include "opennod/config.hpp"

#include <set>

#include "json_util.hpp"
#include "opennod/errors.hpp"

namespace opennod {

using detail::json;
using detail::JsonContext;

std::string_view to_string(Mode mode) noexcept { return mode == Mode::LVIS ? "lvis" : "coco_ovd"; }

std::optional<Mode> parse_mode(std::string_view text) noexcept {
  if (text == "lvis" || text == "LVIS") return Mode::LVIS;
  if (text == "coco_ovd" || text == "COCO_OVD" || text == "coco-ovd") return Mode::COCO_OVD;
  return std::nullopt;
}

std::size_t PipelineConfig::effective_k() const noexcept {
  if (k_final) return *k_final;
  return mode == Mode::LVIS ? 300 : 100;
}

void PipelineConfig::validate() const {
  if (k_final && *k_final == 0) throw InvariantError("k_final must be positive");
  if (!(temperature > 0.0)) throw InvariantError("temperature must be positive");
  if (!(context_pad >= 0.0)) throw InvariantError("context_pad must be non-negative");
  if (!(nms_iou > 0.0 && nms_iou <= 1.0)) throw InvariantError("nms_iou must lie in (0, 1]");
  if (workers == 0) throw InvariantError("workers must be at least 1");
  if (max_batch == 0) throw InvariantError("max_batch must be at least 1");
}

namespace {

const std::set<std::string> kKeys = {
    "vocab",       "templates",   "dets_kn",     "dets_bg",    "dets_gd",   "gt",       "images",
    "image_root",  "cache_dir",   "output",      "report_dir", "fused_dump", "backend", "temperature",
    "confidence",  "label_scope", "context_pad", "k_final",    "mode",      "switches", "class_nms",
    "nms_iou",     "strict_iou",  "workers",     "max_batch"};

const std::set<std::string> kSwitchKeys = {"use_gdino", "use_bg_labelling", "use_sam", "use_srm", "use_saeg"};

std::size_t as_count(const json& v, const std::string& path, const JsonContext& ctx) {
  const std::int64_t n = detail::as_integer(v, path, ctx);
  if (n < 0) ctx.fail(path, "must be non-negative");
  return static_cast<std::size_t>(n);
}

}  // namespace

PipelineConfig parse_config(std::string_view json_text, std::string_view source, const std::filesystem::path& base_dir) {
  const JsonContext ctx{std::string(source), 0};
  const json doc = detail::parse_json_text(json_text, ctx);
  if (!doc.is_object()) ctx.fail("", "config must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    if (kKeys.count(key) == 0) ctx.fail(key, "unknown config key");
  }
  PipelineConfig c;
  const auto path_field = [&](const char* key, std::filesystem::path& out) {
    if (const auto it = doc.find(key); it != doc.end()) {
      const std::string text = detail::as_string(*it, key, ctx);
      out = text.empty() ? std::filesystem::path{} : base_dir / text;
    } else if (!out.empty()) {
      out = base_dir / out;
    }
  };
  path_field("vocab", c.vocab);
  path_field("templates", c.templates);
  path_field("dets_kn", c.dets_kn);
  path_field("dets_bg", c.dets_bg);
  path_field("dets_gd", c.dets_gd);
  path_field("gt", c.gt);
  path_field("images", c.images);
  path_field("image_root", c.image_root);
  path_field("cache_dir", c.cache_dir);
  path_field("output", c.output);
  path_field("report_dir", c.report_dir);
  path_field("fused_dump", c.fused_dump);

  if (const auto it = doc.find("backend"); it != doc.end()) c.backend = detail::as_string(*it, "backend", ctx);
  if (const auto it = doc.find("temperature"); it != doc.end()) c.temperature = detail::as_number(*it, "temperature", ctx);
  if (const auto it = doc.find("confidence"); it != doc.end()) {
    const std::string m = detail::as_string(*it, "confidence", ctx);
    if (m == "softmax") c.confidence = ConfidenceMode::Softmax;
    else if (m == "cosine") c.confidence = ConfidenceMode::Cosine;
    else ctx.fail("confidence", "expected \"softmax\" or \"cosine\"");
  }
  if (const auto it = doc.find("label_scope"); it != doc.end()) {
    const std::string m = detail::as_string(*it, "label_scope", ctx);
    if (m == "all") c.label_scope = LabelScope::All;
    else if (m == "novel") c.label_scope = LabelScope::Novel;
    else ctx.fail("label_scope", "expected \"all\" or \"novel\"");
  }
  if (const auto it = doc.find("context_pad"); it != doc.end()) c.context_pad = detail::as_number(*it, "context_pad", ctx);
  if (const auto it = doc.find("k_final"); it != doc.end() && !it->is_null()) c.k_final = as_count(*it, "k_final", ctx);
  if (const auto it = doc.find("mode"); it != doc.end()) {
    const auto m = parse_mode(detail::as_string(*it, "mode", ctx));
    if (!m) ctx.fail("mode", "expected \"lvis\" or \"coco_ovd\"");
    c.mode = *m;
  }
  if (const auto it = doc.find("switches"); it != doc.end()) {
    if (!it->is_object()) ctx.fail("switches", "expected an object");
    for (const auto& [key, value] : it->items()) {
      if (kSwitchKeys.count(key) == 0) ctx.fail("switches." + key, "unknown switch");
    }
    const auto flag = [&](const char* key, bool& out) {
      if (const auto s = it->find(key); s != it->end()) out = detail::as_bool(*s, std::string("switches.") + key, ctx);
    };
    flag("use_gdino", c.switches.use_gdino);
    flag("use_bg_labelling", c.switches.use_bg_labelling);
    flag("use_sam", c.switches.use_sam);
    flag("use_srm", c.switches.use_srm);
    flag("use_saeg", c.switches.use_saeg);
  }
  if (const auto it = doc.find("class_nms"); it != doc.end()) c.class_nms = detail::as_bool(*it, "class_nms", ctx);
  if (const auto it = doc.find("nms_iou"); it != doc.end()) c.nms_iou = detail::as_number(*it, "nms_iou", ctx);
  if (const auto it = doc.find("strict_iou"); it != doc.end()) c.strict_iou = detail::as_bool(*it, "strict_iou", ctx);
  if (const auto it = doc.find("workers"); it != doc.end()) c.workers = as_count(*it, "workers", ctx);
  if (const auto it = doc.find("max_batch"); it != doc.end()) c.max_batch = as_count(*it, "max_batch", ctx);
  try {
    c.validate();
  } catch (const InvariantError& e) {
    ctx.fail("", e.what());
  }
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  return parse_config(read_text_file(path), path.string(), path.parent_path());
}

std::string serialize_config(const PipelineConfig& c) {
  json doc{{"vocab", c.vocab.string()},
           {"templates", c.templates.string()},
           {"dets_kn", c.dets_kn.string()},
           {"dets_bg", c.dets_bg.string()},
           {"dets_gd", c.dets_gd.string()},
           {"gt", c.gt.string()},
           {"images", c.images.string()},
           {"image_root", c.image_root.string()},
           {"cache_dir", c.cache_dir.string()},
           {"output", c.output.string()},
           {"report_dir", c.report_dir.string()},
           {"fused_dump", c.fused_dump.string()},
           {"backend", c.backend},
           {"temperature", c.temperature},
           {"confidence", c.confidence == ConfidenceMode::Softmax ? "softmax" : "cosine"},
           {"label_scope", c.label_scope == LabelScope::All ? "all" : "novel"},
           {"context_pad", c.context_pad},
           {"k_final", c.k_final ? json(*c.k_final) : json(nullptr)},
           {"mode", to_string(c.mode)},
           {"switches",
            {{"use_gdino", c.switches.use_gdino},
             {"use_bg_labelling", c.switches.use_bg_labelling},
             {"use_sam", c.switches.use_sam},
             {"use_srm", c.switches.use_srm},
             {"use_saeg", c.switches.use_saeg}}},
           {"class_nms", c.class_nms},
           {"nms_iou", c.nms_iou},
           {"strict_iou", c.strict_iou},
           {"workers", c.workers},
           {"max_batch", c.max_batch}};
  return doc.dump(2) + "\n";
}

}  // namespace opennod
