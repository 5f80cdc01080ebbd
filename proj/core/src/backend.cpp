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

#include "opennod/backend.hpp"

#include <algorithm>
#include <exception>
#include <map>
#include <sstream>
#include <thread>

#include "opennod/errors.hpp"

namespace opennod {

namespace {

template <class T>
std::vector<std::vector<T>> chunk(std::span<const T> items, std::size_t max_batch) {
  std::vector<std::vector<T>> out;
  for (std::size_t i = 0; i < items.size(); i += max_batch) {
    const std::size_t n = std::min(max_batch, items.size() - i);
    out.emplace_back(items.begin() + static_cast<std::ptrdiff_t>(i),
                     items.begin() + static_cast<std::ptrdiff_t>(i + n));
  }
  return out;
}

std::size_t request_size(const protocol::Request& r) {
  if (const auto* t = std::get_if<protocol::TextEmbedRequest>(&r)) return t->texts.size();
  if (const auto* e = std::get_if<protocol::ImageEmbedRoiRequest>(&r)) return e->boxes.size();
  if (const auto* s = std::get_if<protocol::SegmentBoxesRequest>(&r)) return s->boxes.size();
  return 1;
}

}  // namespace

ProtocolClient::ProtocolClient(std::unique_ptr<Channel> channel) : ProtocolClient(std::move(channel), Options{}) {}

ProtocolClient::ProtocolClient(std::unique_ptr<Channel> channel, Options options)
    : channel_(std::move(channel)), options_(options) {
  if (options_.max_batch == 0) options_.max_batch = 1;
}

ProtocolClient::~ProtocolClient() {
  if (channel_) {
    try {
      channel_->close_send();
    } catch (...) {
    }
  }
}

void ProtocolClient::fail(const std::string& message) {
  broken_ = true;
  throw BackendError(message);
}

std::vector<protocol::Response> ProtocolClient::call_many(const std::vector<protocol::Request>& requests) {
  if (broken_) throw BackendError("backend session is unusable after an earlier failure");
  const std::uint64_t first_id = next_id_;
  next_id_ += requests.size();
  std::vector<std::string> frames;
  frames.reserve(requests.size());
  for (std::size_t i = 0; i < requests.size(); ++i) {
    frames.push_back(protocol::encode_request(first_id + i, requests[i]));
  }

  // Writes run on their own thread so a server that answers while we are
  // still sending cannot deadlock on full pipe buffers.
  std::exception_ptr write_error;
  std::vector<std::optional<protocol::Response>> slots(requests.size());
  {
    std::jthread writer;
    if (frames.size() == 1) {
      channel_->send(frames.front());
    } else {
      writer = std::jthread([&] {
        try {
          for (const auto& f : frames) channel_->send(f);
        } catch (...) {
          write_error = std::current_exception();
        }
      });
    }
    std::string read_error;
    for (std::size_t got = 0; got < requests.size() && read_error.empty(); ++got) {
      std::optional<std::string> frame;
      try {
        frame = channel_->receive();
      } catch (const std::exception& e) {
        read_error = e.what();
        break;
      }
      if (!frame) {
        read_error = "backend closed the connection with " + std::to_string(requests.size() - got) +
                     " response(s) outstanding";
        break;
      }
      try {
        auto [id, response] = protocol::decode_response(*frame);
        if (id < first_id || id >= first_id + requests.size()) {
          read_error = "response id " + std::to_string(id) + " does not match any outstanding request";
        } else if (slots[id - first_id]) {
          read_error = "duplicate response for id " + std::to_string(id);
        } else {
          slots[id - first_id] = std::move(response);
        }
      } catch (const ParseError& e) {
        read_error = std::string("malformed response: ") + e.what();
      }
    }
    if (!read_error.empty()) {
      broken_ = true;
      // Unblock a writer stuck on a peer that stopped reading.
      channel_->close_send();
      writer = {};
      throw BackendError(read_error);
    }
  }
  if (write_error) {
    broken_ = true;
    std::rethrow_exception(write_error);
  }

  std::vector<protocol::Response> out;
  out.reserve(slots.size());
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (const auto* err = std::get_if<protocol::ErrorResponse>(&*slots[i])) {
      throw BackendError("backend error for " + std::string(protocol::kind_of(requests[i])) + ": " + err->message);
    }
    out.push_back(std::move(*slots[i]));
  }
  return out;
}

void ProtocolClient::handshake() {
  if (hello_) return;
  auto responses = call_many({protocol::HandshakeRequest{}});
  auto* hello = std::get_if<protocol::HandshakeResponse>(&responses.front());
  if (!hello) fail("backend answered the handshake with the wrong message kind");
  hello_ = std::move(*hello);
}

std::size_t ProtocolClient::dim() {
  handshake();
  return hello_->dim;
}

std::string ProtocolClient::model_name() {
  handshake();
  return hello_->model;
}

std::vector<Embedding> ProtocolClient::collect_embeddings(const std::vector<protocol::Request>& requests,
                                                          std::size_t expected) {
  const std::size_t d = dim();
  auto responses = call_many(requests);
  std::vector<Embedding> out;
  out.reserve(expected);
  for (std::size_t i = 0; i < responses.size(); ++i) {
    auto* emb = std::get_if<protocol::EmbeddingsResponse>(&responses[i]);
    if (!emb) fail("backend answered an embedding request with the wrong message kind");
    if (emb->embeddings.size() != request_size(requests[i])) {
      fail("backend returned " + std::to_string(emb->embeddings.size()) + " embeddings for " +
           std::to_string(request_size(requests[i])) + " inputs");
    }
    for (auto& e : emb->embeddings) {
      if (e.size() != d) {
        fail("embedding dimension " + std::to_string(e.size()) + " differs from handshake dimension " +
             std::to_string(d));
      }
      out.push_back(std::move(e));
    }
  }
  return out;
}

std::vector<Embedding> ProtocolClient::text_embed(std::span<const std::string> texts) {
  if (texts.empty()) return {};
  std::vector<protocol::Request> requests;
  for (auto& part : chunk(texts, options_.max_batch)) requests.emplace_back(protocol::TextEmbedRequest{std::move(part)});
  return collect_embeddings(requests, texts.size());
}

std::vector<Embedding> ProtocolClient::image_embed_roi(const ImageRef& image, std::span<const BBox> boxes,
                                                       double context_pad) {
  if (boxes.empty()) return {};
  std::vector<protocol::Request> requests;
  for (auto& part : chunk(boxes, options_.max_batch)) {
    requests.emplace_back(protocol::ImageEmbedRoiRequest{image, std::move(part), context_pad});
  }
  return collect_embeddings(requests, boxes.size());
}

std::vector<SegmentationResult> ProtocolClient::segment_boxes(const ImageRef& image, std::span<const BBox> boxes) {
  if (boxes.empty()) return {};
  std::vector<protocol::Request> requests;
  for (auto& part : chunk(boxes, options_.max_batch)) {
    requests.emplace_back(protocol::SegmentBoxesRequest{image, std::move(part)});
  }
  auto responses = call_many(requests);
  std::vector<SegmentationResult> out;
  out.reserve(boxes.size());
  for (std::size_t i = 0; i < responses.size(); ++i) {
    auto* seg = std::get_if<protocol::SegmentationsResponse>(&responses[i]);
    if (!seg) fail("backend answered segment_boxes with the wrong message kind");
    if (seg->results.size() != request_size(requests[i])) {
      fail("backend returned " + std::to_string(seg->results.size()) + " masks for " +
           std::to_string(request_size(requests[i])) + " prompt boxes");
    }
    for (auto& s : seg->results) out.push_back(std::move(s));
  }
  return out;
}

protocol::Response dispatch(Backend& impl, const protocol::Request& request) {
  try {
    if (std::holds_alternative<protocol::HandshakeRequest>(request)) {
      return protocol::HandshakeResponse{impl.dim(), impl.model_name()};
    }
    if (const auto* t = std::get_if<protocol::TextEmbedRequest>(&request)) {
      return protocol::EmbeddingsResponse{impl.text_embed(t->texts)};
    }
    if (const auto* e = std::get_if<protocol::ImageEmbedRoiRequest>(&request)) {
      return protocol::EmbeddingsResponse{impl.image_embed_roi(e->image, e->boxes, e->context_pad)};
    }
    const auto& s = std::get<protocol::SegmentBoxesRequest>(request);
    return protocol::SegmentationsResponse{impl.segment_boxes(s.image, s.boxes)};
  } catch (const std::exception& e) {
    return protocol::ErrorResponse{e.what()};
  }
}

void serve_session(Channel& channel, Backend& impl) {
  while (auto frame = channel.receive()) {
    std::uint64_t id = 0;
    std::string kind = "error";
    protocol::Response response;
    try {
      auto [rid, request] = protocol::decode_request(*frame);
      id = rid;
      kind = std::string(protocol::kind_of(request));
      response = dispatch(impl, request);
    } catch (const ParseError& e) {
      response = protocol::ErrorResponse{std::string("protocol violation: ") + e.what()};
    }
    channel.send(protocol::encode_response(id, kind, response));
  }
}

std::unique_ptr<Backend> connect_backend(std::string_view endpoint, ProtocolClient::Options options) {
  constexpr std::string_view kTcp = "tcp://";
  constexpr std::string_view kExec = "exec:";
  if (endpoint.starts_with(kTcp)) {
    const std::string rest(endpoint.substr(kTcp.size()));
    const auto colon = rest.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == rest.size()) {
      throw BackendError("backend endpoint \"" + std::string(endpoint) + "\" must be tcp://HOST:PORT");
    }
    return std::make_unique<ProtocolClient>(connect_tcp(rest.substr(0, colon), rest.substr(colon + 1)), options);
  }
  if (endpoint.starts_with(kExec)) {
    std::istringstream words{std::string(endpoint.substr(kExec.size()))};
    std::vector<std::string> argv;
    for (std::string w; words >> w;) argv.push_back(w);
    if (argv.empty()) throw BackendError("exec: endpoint names no program");
    return std::make_unique<ProtocolClient>(spawn_process(argv), options);
  }
  throw BackendError("unsupported backend endpoint \"" + std::string(endpoint) +
                     "\" (expected tcp://HOST:PORT or exec:COMMAND)");
}

}  // namespace opennod
