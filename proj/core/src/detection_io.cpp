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

#include "opennod/detection_io.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "json_util.hpp"
#include "opennod/errors.hpp"
#include "opennod/vocabulary.hpp"

namespace opennod {

using detail::json;
using detail::JsonContext;

namespace {

bool blank(const std::string& line) {
  return line.find_first_not_of(" \t\r") == std::string::npos;
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), 0, "", "cannot open file");
  return in;
}

}  // namespace

RawByImage parse_detections(std::istream& in, SourceTag source, std::string_view source_name) {
  RawByImage out;
  std::string line;
  JsonContext ctx{std::string(source_name), 0};
  while (std::getline(in, line)) {
    ++ctx.line;
    if (blank(line)) continue;
    const json rec = detail::parse_json_text(line, ctx);
    if (!rec.is_object()) ctx.fail("", "expected a JSON object");
    RawDetection det;
    det.source = source;
    const ImageId image = detail::as_integer(detail::require(rec, "image_id", "", ctx), "image_id", ctx);
    det.box = detail::as_box(detail::require(rec, "box", "", ctx), "box", ctx);
    const auto score_it = rec.find("score");
    const auto class_it = rec.find("class_id");
    const bool has_score = score_it != rec.end() && !score_it->is_null();
    const bool has_class = class_it != rec.end() && !class_it->is_null();
    if (source == SourceTag::BG) {
      if (has_class) ctx.fail("class_id", "BG records must not carry a class");
      if (has_score) ctx.fail("score", "BG records must not carry a score");
    } else {
      if (!has_class) ctx.fail("class_id", "required for " + std::string(to_string(source)) + " records");
      if (!has_score) ctx.fail("score", "required for " + std::string(to_string(source)) + " records");
      const double s = detail::as_number(*score_it, "score", ctx);
      if (!(s >= 0.0 && s <= 1.0)) ctx.fail("score", "score " + std::to_string(s) + " outside [0,1]");
      const std::int64_t c = detail::as_integer(*class_it, "class_id", ctx);
      if (c < 0 || c > std::numeric_limits<ClassId>::max()) ctx.fail("class_id", "out of range");
      det.score = s;
      det.class_id = static_cast<ClassId>(c);
    }
    out[image].push_back(det);
  }
  return out;
}

RawByImage load_detections(const std::filesystem::path& path, SourceTag source) {
  auto in = open_or_throw(path);
  return parse_detections(in, source, path.string());
}

void write_detections(std::ostream& out, const RawByImage& dets) {
  for (const auto& [image, list] : dets) {
    for (const auto& d : list) {
      json rec{{"image_id", image}, {"box", detail::box_to_json(d.box)}};
      if (d.score) rec["score"] = *d.score;
      if (d.class_id) rec["class_id"] = *d.class_id;
      out << rec.dump() << '\n';
    }
  }
}

const ImageInfo* GroundTruthSet::find_image(ImageId id) const {
  const auto it = images.find(id);
  return it == images.end() ? nullptr : &it->second.info;
}

std::size_t GroundTruthSet::box_count() const {
  std::size_t n = 0;
  for (const auto& [id, img] : images) n += img.boxes.size();
  return n;
}

GroundTruthSet parse_ground_truth(std::string_view json_text, std::string_view source,
                                  const ClassVocabulary* vocab) {
  const JsonContext ctx{std::string(source), 0};
  const json doc = detail::parse_json_text(json_text, ctx);
  const json& images = detail::require(doc, "images", "", ctx);
  if (!images.is_array()) ctx.fail("images", "expected an array");
  GroundTruthSet gt;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const std::string path = "images[" + std::to_string(i) + "]";
    const json& im = images[i];
    ImageInfo info;
    info.id = detail::as_integer(detail::require(im, "id", path, ctx), path + ".id", ctx);
    info.width = detail::as_number(detail::require(im, "width", path, ctx), path + ".width", ctx);
    info.height = detail::as_number(detail::require(im, "height", path, ctx), path + ".height", ctx);
    if (!(info.width > 0.0) || !(info.height > 0.0)) ctx.fail(path, "image dimensions must be positive");
    if (const auto it = im.find("file_name"); it != im.end()) {
      info.file_name = detail::as_string(*it, path + ".file_name", ctx);
    }
    const auto [slot, inserted] = gt.images.try_emplace(info.id);
    if (!inserted) ctx.fail(path + ".id", "duplicate image id " + std::to_string(info.id));
    slot->second.info = std::move(info);
  }
  if (const auto it = doc.find("annotations"); it != doc.end()) {
    if (!it->is_array()) ctx.fail("annotations", "expected an array");
    for (std::size_t i = 0; i < it->size(); ++i) {
      const std::string path = "annotations[" + std::to_string(i) + "]";
      const json& a = (*it)[i];
      const ImageId image = detail::as_integer(detail::require(a, "image_id", path, ctx), path + ".image_id", ctx);
      const auto img = gt.images.find(image);
      if (img == gt.images.end()) ctx.fail(path + ".image_id", "unknown image id " + std::to_string(image));
      GroundTruthBox box;
      box.box = detail::as_box(detail::require(a, "bbox", path, ctx), path + ".bbox", ctx);
      const std::int64_t cat =
          detail::as_integer(detail::require(a, "category_id", path, ctx), path + ".category_id", ctx);
      if (cat < 0 || cat > std::numeric_limits<ClassId>::max()) ctx.fail(path + ".category_id", "out of range");
      box.class_id = static_cast<ClassId>(cat);
      if (vocab && !vocab->contains(box.class_id)) {
        ctx.fail(path + ".category_id", "class " + std::to_string(cat) + " is not in the vocabulary");
      }
      const ImageInfo& info = img->second.info;
      if (box.box.x1 < 0.0 || box.box.y1 < 0.0 || box.box.x2 > info.width || box.box.y2 > info.height) {
        ctx.fail(path + ".bbox", "box lies outside the image bounds");
      }
      img->second.boxes.push_back(box);
    }
  }
  return gt;
}

GroundTruthSet load_ground_truth(const std::filesystem::path& path, const ClassVocabulary* vocab) {
  return parse_ground_truth(read_text_file(path), path.string(), vocab);
}

std::string ground_truth_to_json(const GroundTruthSet& gt) {
  json images = json::array();
  json annotations = json::array();
  for (const auto& [id, img] : gt.images) {
    json im{{"id", id}, {"width", img.info.width}, {"height", img.info.height}};
    if (!img.info.file_name.empty()) im["file_name"] = img.info.file_name;
    images.push_back(std::move(im));
    for (const auto& b : img.boxes) {
      annotations.push_back({{"image_id", id}, {"bbox", detail::box_to_json(b.box)}, {"category_id", b.class_id}});
    }
  }
  return json{{"images", images}, {"annotations", annotations}}.dump();
}

void write_final(std::ostream& out, const RefinedByImage& dets) {
  for (const auto& [image, list] : dets) {
    for (const auto& d : list) {
      const json rec{{"image_id", image},
                     {"box", detail::box_to_json(d.box)},
                     {"score", d.score},
                     {"class_id", d.class_id},
                     {"source", to_string(d.source)},
                     {"fallback_flag", d.fallback_flag}};
      out << rec.dump() << '\n';
    }
  }
}

RefinedByImage parse_final(std::istream& in, std::string_view source_name) {
  RefinedByImage out;
  std::string line;
  JsonContext ctx{std::string(source_name), 0};
  while (std::getline(in, line)) {
    ++ctx.line;
    if (blank(line)) continue;
    const json rec = detail::parse_json_text(line, ctx);
    if (!rec.is_object()) ctx.fail("", "expected a JSON object");
    RefinedDetection d;
    const ImageId image = detail::as_integer(detail::require(rec, "image_id", "", ctx), "image_id", ctx);
    d.box = detail::as_box(detail::require(rec, "box", "", ctx), "box", ctx);
    d.score = detail::as_number(detail::require(rec, "score", "", ctx), "score", ctx);
    const std::int64_t c = detail::as_integer(detail::require(rec, "class_id", "", ctx), "class_id", ctx);
    if (c < 0 || c > std::numeric_limits<ClassId>::max()) ctx.fail("class_id", "out of range");
    d.class_id = static_cast<ClassId>(c);
    if (const auto it = rec.find("source"); it != rec.end()) {
      const auto tag = parse_source_tag(detail::as_string(*it, "source", ctx));
      if (!tag) ctx.fail("source", "expected one of KN, BG, GD");
      d.source = *tag;
    }
    if (const auto it = rec.find("fallback_flag"); it != rec.end()) {
      d.fallback_flag = detail::as_bool(*it, "fallback_flag", ctx);
    }
    out[image].push_back(d);
  }
  return out;
}

RefinedByImage load_final(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  return parse_final(in, path.string());
}

void write_fused_line(std::ostream& out, ImageId image, const PoolCounts& counts,
                      const std::vector<LabeledDetection>& dets) {
  json list = json::array();
  for (const auto& d : dets) {
    list.push_back({{"box", detail::box_to_json(d.box)},
                    {"score", d.score},
                    {"class_id", d.class_id},
                    {"source", to_string(d.source)}});
  }
  const json rec{{"image_id", image},
                 {"counts", {{"n_kn", counts.n_kn}, {"n_bg", counts.n_bg}, {"n_gd", counts.n_gd}}},
                 {"detections", list}};
  out << rec.dump() << '\n';
}

}  // namespace opennod
