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
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "opennod/embedding.hpp"
#include "opennod/geometry.hpp"
#include "opennod/rle.hpp"

namespace opennod {

/// Identifies an image to the backend. `path` is resolved by the backend; the
/// engine never touches pixels.
struct ImageRef {
  ImageId id = 0;
  std::string path;

  friend bool operator==(const ImageRef&, const ImageRef&) = default;
};

namespace protocol {

// Every message is a JSON object {kind, id, payload}; responses echo the
// request id and kind. Errors are {kind: "error", id, message}.

struct HandshakeRequest {
  friend bool operator==(const HandshakeRequest&, const HandshakeRequest&) = default;
};
struct TextEmbedRequest {
  std::vector<std::string> texts;
  friend bool operator==(const TextEmbedRequest&, const TextEmbedRequest&) = default;
};
struct ImageEmbedRoiRequest {
  ImageRef image;
  std::vector<BBox> boxes;
  double context_pad = 0.0;
  friend bool operator==(const ImageEmbedRoiRequest&, const ImageEmbedRoiRequest&) = default;
};
struct SegmentBoxesRequest {
  ImageRef image;
  std::vector<BBox> boxes;
  friend bool operator==(const SegmentBoxesRequest&, const SegmentBoxesRequest&) = default;
};

using Request = std::variant<HandshakeRequest, TextEmbedRequest, ImageEmbedRoiRequest, SegmentBoxesRequest>;

struct HandshakeResponse {
  std::size_t dim = 0;
  std::string model;
};
struct EmbeddingsResponse {
  std::vector<Embedding> embeddings;
};
struct SegmentationsResponse {
  std::vector<SegmentationResult> results;
};
struct ErrorResponse {
  std::string message;
};

using Response = std::variant<HandshakeResponse, EmbeddingsResponse, SegmentationsResponse, ErrorResponse>;

std::string_view kind_of(const Request& request) noexcept;

std::string encode_request(std::uint64_t id, const Request& request);
std::pair<std::uint64_t, Request> decode_request(std::string_view text);

/// `kind` is the request kind being answered (ignored for ErrorResponse).
std::string encode_response(std::uint64_t id, std::string_view kind, const Response& response);
std::pair<std::uint64_t, Response> decode_response(std::string_view text);

/// Length prefix: 4-byte big-endian payload size.
inline constexpr std::size_t kFrameHeaderBytes = 4;
inline constexpr std::size_t kMaxFrameBytes = std::size_t{1} << 30;

}  // namespace protocol
}  // namespace opennod
