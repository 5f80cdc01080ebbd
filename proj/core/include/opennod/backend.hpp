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
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "opennod/embedding.hpp"
#include "opennod/protocol.hpp"
#include "opennod/rle.hpp"
#include "opennod/transport.hpp"

namespace opennod {

/// The model service boundary: text and ROI embeddings plus box-prompted
/// segmentation. Responses are always in request order with one item per
/// input. A session is not safe for concurrent use.
class Backend {
 public:
  virtual ~Backend() = default;

  /// Embedding dimension d, fixed for the session.
  virtual std::size_t dim() = 0;
  virtual std::string model_name() = 0;

  virtual std::vector<Embedding> text_embed(std::span<const std::string> texts) = 0;
  virtual std::vector<Embedding> image_embed_roi(const ImageRef& image, std::span<const BBox> boxes,
                                                 double context_pad) = 0;
  /// One SegmentationResult per prompt box; the backend pre-selects the best
  /// mask when its segmenter produces several.
  virtual std::vector<SegmentationResult> segment_boxes(const ImageRef& image, std::span<const BBox> boxes) = 0;
};

using BackendFactory = std::function<std::unique_ptr<Backend>()>;

/// Client side of the wire protocol. Large requests are split into chunks of
/// at most `max_batch` items that are pipelined on the channel; responses are
/// matched back by message id, so the server may answer in any order.
class ProtocolClient final : public Backend {
 public:
  struct Options {
    std::size_t max_batch = 64;
  };

  explicit ProtocolClient(std::unique_ptr<Channel> channel);
  ProtocolClient(std::unique_ptr<Channel> channel, Options options);
  ~ProtocolClient() override;

  std::size_t dim() override;
  std::string model_name() override;
  std::vector<Embedding> text_embed(std::span<const std::string> texts) override;
  std::vector<Embedding> image_embed_roi(const ImageRef& image, std::span<const BBox> boxes,
                                         double context_pad) override;
  std::vector<SegmentationResult> segment_boxes(const ImageRef& image, std::span<const BBox> boxes) override;

  /// Sends every request before reading, then returns the responses in
  /// request order. Error responses become BackendError.
  std::vector<protocol::Response> call_many(const std::vector<protocol::Request>& requests);

  std::uint64_t messages_sent() const noexcept { return next_id_ - 1; }

 private:
  void handshake();
  std::vector<Embedding> collect_embeddings(const std::vector<protocol::Request>& requests, std::size_t expected);
  [[noreturn]] void fail(const std::string& message);

  std::unique_ptr<Channel> channel_;
  Options options_;
  std::uint64_t next_id_ = 1;
  std::optional<protocol::HandshakeResponse> hello_;
  bool broken_ = false;
};

/// Answers requests from `channel` with `impl` until end-of-stream. Failures
/// inside `impl` become error responses; the loop keeps serving.
void serve_session(Channel& channel, Backend& impl);

/// Handles one decoded request against `impl` and returns the response.
protocol::Response dispatch(Backend& impl, const protocol::Request& request);

/// Opens a session from an endpoint string:
///   tcp://HOST:PORT        connect to a running service
///   exec:PROGRAM ARGS...   spawn a backend speaking the protocol on stdio
std::unique_ptr<Backend> connect_backend(std::string_view endpoint, ProtocolClient::Options options = {});

/// Environment variable that overrides the configured endpoint.
inline constexpr const char* kBackendEnvVar = "OPENNOD_BACKEND";

}  // namespace opennod
