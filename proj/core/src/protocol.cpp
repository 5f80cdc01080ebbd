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

#include "opennod/protocol.hpp"

#include "json_util.hpp"
#include "opennod/codec.hpp"
#include "opennod/errors.hpp"

namespace opennod::protocol {

using detail::json;
using detail::JsonContext;

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

json image_to_json(const ImageRef& ref) { return {{"id", ref.id}, {"path", ref.path}}; }

ImageRef image_from_json(const json& v, const JsonContext& ctx) {
  ImageRef ref;
  ref.id = detail::as_integer(detail::require(v, "id", "payload.image", ctx), "payload.image.id", ctx);
  if (const auto it = v.find("path"); it != v.end()) ref.path = detail::as_string(*it, "payload.image.path", ctx);
  return ref;
}

json boxes_to_json(const std::vector<BBox>& boxes) {
  json arr = json::array();
  for (const auto& b : boxes) arr.push_back(detail::box_to_json(b));
  return arr;
}

std::vector<BBox> boxes_from_json(const json& v, const JsonContext& ctx) {
  if (!v.is_array()) ctx.fail("payload.boxes", "expected an array");
  std::vector<BBox> boxes;
  boxes.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    boxes.push_back(detail::as_box(v[i], "payload.boxes[" + std::to_string(i) + "]", ctx));
  }
  return boxes;
}

std::uint64_t message_id(const json& doc, const JsonContext& ctx) {
  const auto it = doc.find("id");
  if (it == doc.end()) return 0;
  if (!it->is_number_unsigned() && !it->is_number_integer()) ctx.fail("id", "expected an integer");
  return it->get<std::uint64_t>();
}

}  // namespace

std::string_view kind_of(const Request& request) noexcept {
  return std::visit(overloaded{[](const HandshakeRequest&) { return std::string_view("handshake"); },
                               [](const TextEmbedRequest&) { return std::string_view("text_embed"); },
                               [](const ImageEmbedRoiRequest&) { return std::string_view("image_embed_roi"); },
                               [](const SegmentBoxesRequest&) { return std::string_view("segment_boxes"); }},
                    request);
}

std::string encode_request(std::uint64_t id, const Request& request) {
  json payload = std::visit(
      overloaded{[](const HandshakeRequest&) { return json::object(); },
                 [](const TextEmbedRequest& r) { return json{{"texts", r.texts}}; },
                 [](const ImageEmbedRoiRequest& r) {
                   return json{{"image", image_to_json(r.image)},
                               {"boxes", boxes_to_json(r.boxes)},
                               {"context_pad", r.context_pad}};
                 },
                 [](const SegmentBoxesRequest& r) {
                   return json{{"image", image_to_json(r.image)}, {"boxes", boxes_to_json(r.boxes)}};
                 }},
      request);
  return json{{"kind", kind_of(request)}, {"id", id}, {"payload", std::move(payload)}}.dump();
}

std::pair<std::uint64_t, Request> decode_request(std::string_view text) {
  const JsonContext ctx{"request", 0};
  const json doc = detail::parse_json_text(text, ctx);
  const std::string kind = detail::as_string(detail::require(doc, "kind", "", ctx), "kind", ctx);
  const std::uint64_t id = message_id(doc, ctx);
  static const json kEmpty = json::object();
  const auto pit = doc.find("payload");
  const json& payload = pit == doc.end() ? kEmpty : *pit;
  if (kind == "handshake") return {id, HandshakeRequest{}};
  if (kind == "text_embed") {
    const json& texts = detail::require(payload, "texts", "payload", ctx);
    if (!texts.is_array()) ctx.fail("payload.texts", "expected an array of strings");
    TextEmbedRequest r;
    for (std::size_t i = 0; i < texts.size(); ++i) {
      r.texts.push_back(detail::as_string(texts[i], "payload.texts[" + std::to_string(i) + "]", ctx));
    }
    return {id, std::move(r)};
  }
  if (kind == "image_embed_roi") {
    ImageEmbedRoiRequest r;
    r.image = image_from_json(detail::require(payload, "image", "payload", ctx), ctx);
    r.boxes = boxes_from_json(detail::require(payload, "boxes", "payload", ctx), ctx);
    if (const auto it = payload.find("context_pad"); it != payload.end()) {
      r.context_pad = detail::as_number(*it, "payload.context_pad", ctx);
    }
    return {id, std::move(r)};
  }
  if (kind == "segment_boxes") {
    SegmentBoxesRequest r;
    r.image = image_from_json(detail::require(payload, "image", "payload", ctx), ctx);
    r.boxes = boxes_from_json(detail::require(payload, "boxes", "payload", ctx), ctx);
    return {id, std::move(r)};
  }
  ctx.fail("kind", "unknown request kind \"" + kind + "\"");
}

std::string encode_response(std::uint64_t id, std::string_view kind, const Response& response) {
  return std::visit(
      overloaded{
          [&](const HandshakeResponse& r) {
            return json{{"kind", "handshake"}, {"id", id}, {"payload", {{"d", r.dim}, {"model", r.model}}}}.dump();
          },
          [&](const EmbeddingsResponse& r) {
            json list = json::array();
            std::size_t d = r.embeddings.empty() ? 0 : r.embeddings.front().size();
            for (const auto& e : r.embeddings) list.push_back(codec::encode_f32(e));
            return json{{"kind", kind}, {"id", id}, {"payload", {{"d", d}, {"embeddings", std::move(list)}}}}.dump();
          },
          [&](const SegmentationsResponse& r) {
            json list = json::array();
            for (const auto& s : r.results) {
              list.push_back({{"height", s.mask.height},
                              {"width", s.mask.width},
                              {"counts", s.mask.counts},
                              {"score", s.sam_score}});
            }
            return json{{"kind", kind}, {"id", id}, {"payload", {{"results", std::move(list)}}}}.dump();
          },
          [&](const ErrorResponse& r) { return json{{"kind", "error"}, {"id", id}, {"message", r.message}}.dump(); }},
      response);
}

std::pair<std::uint64_t, Response> decode_response(std::string_view text) {
  const JsonContext ctx{"response", 0};
  const json doc = detail::parse_json_text(text, ctx);
  const std::string kind = detail::as_string(detail::require(doc, "kind", "", ctx), "kind", ctx);
  const std::uint64_t id = message_id(doc, ctx);
  if (kind == "error") {
    std::string message = "unspecified backend error";
    if (const auto it = doc.find("message"); it != doc.end() && it->is_string()) message = it->get<std::string>();
    return {id, ErrorResponse{std::move(message)}};
  }
  const json& payload = detail::require(doc, "payload", "", ctx);
  if (kind == "handshake") {
    HandshakeResponse r;
    const std::int64_t d = detail::as_integer(detail::require(payload, "d", "payload", ctx), "payload.d", ctx);
    if (d <= 0) ctx.fail("payload.d", "embedding dimension must be positive");
    r.dim = static_cast<std::size_t>(d);
    if (const auto it = payload.find("model"); it != payload.end()) r.model = detail::as_string(*it, "payload.model", ctx);
    return {id, std::move(r)};
  }
  if (kind == "text_embed" || kind == "image_embed_roi") {
    const json& list = detail::require(payload, "embeddings", "payload", ctx);
    if (!list.is_array()) ctx.fail("payload.embeddings", "expected an array");
    EmbeddingsResponse r;
    for (std::size_t i = 0; i < list.size(); ++i) {
      const std::string path = "payload.embeddings[" + std::to_string(i) + "]";
      try {
        r.embeddings.push_back(codec::decode_f32(detail::as_string(list[i], path, ctx)));
      } catch (const ParseError& e) {
        ctx.fail(path, e.what());
      }
    }
    return {id, std::move(r)};
  }
  if (kind == "segment_boxes") {
    const json& list = detail::require(payload, "results", "payload", ctx);
    if (!list.is_array()) ctx.fail("payload.results", "expected an array");
    SegmentationsResponse r;
    for (std::size_t i = 0; i < list.size(); ++i) {
      const std::string path = "payload.results[" + std::to_string(i) + "]";
      const json& item = list[i];
      SegmentationResult s;
      const std::int64_t h = detail::as_integer(detail::require(item, "height", path, ctx), path + ".height", ctx);
      const std::int64_t w = detail::as_integer(detail::require(item, "width", path, ctx), path + ".width", ctx);
      if (h <= 0 || w <= 0) ctx.fail(path, "mask dimensions must be positive");
      s.mask.height = static_cast<std::size_t>(h);
      s.mask.width = static_cast<std::size_t>(w);
      const json& counts = detail::require(item, "counts", path, ctx);
      if (!counts.is_array()) ctx.fail(path + ".counts", "expected an array of integers");
      for (std::size_t k = 0; k < counts.size(); ++k) {
        const std::int64_t c = detail::as_integer(counts[k], path + ".counts[" + std::to_string(k) + "]", ctx);
        if (c < 0 || c > std::numeric_limits<std::uint32_t>::max()) ctx.fail(path + ".counts", "count out of range");
        s.mask.counts.push_back(static_cast<std::uint32_t>(c));
      }
      try {
        validate_rle(s.mask);
      } catch (const InvariantError& e) {
        ctx.fail(path + ".counts", e.what());
      }
      s.sam_score = detail::as_number(detail::require(item, "score", path, ctx), path + ".score", ctx);
      r.results.push_back(std::move(s));
    }
    return {id, std::move(r)};
  }
  ctx.fail("kind", "unknown response kind \"" + kind + "\"");
}

}  // namespace opennod::protocol
