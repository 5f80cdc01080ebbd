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

#include <gtest/gtest.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <json.hpp>
#include <thread>

#include "fake_backend.hpp"
#include "opennod/backend.hpp"
#include "opennod/errors.hpp"
#include "opennod/protocol.hpp"
#include "opennod/transport.hpp"
#include "test_support.hpp"

using nlohmann::json;
using opennod::BBox;
using opennod::Embedding;
namespace protocol = opennod::protocol;
using testing_support::FakeBackend;
using testing_support::one_hot;

namespace {

FakeBackend text_backend(std::size_t d = 4) {
  FakeBackend f;
  f.d = d;
  // Embedding encodes the text length so order mistakes are visible.
  f.text = [d](const std::string& t) { return one_hot(d, 0, static_cast<double>(t.size())); };
  f.roi = [d](const opennod::ImageRef&, const BBox& b) { return one_hot(d, 1, b.x1 + 1); };
  f.segment = [](const opennod::ImageRef&, const BBox& b) {
    return opennod::SegmentationResult{opennod::RleMask{2, 2, {1, 2, 1}}, b.x1 / 100};
  };
  return f;
}

// Serves `impl` on the far end of an in-memory channel until the client hangs up.
struct InProcessServer {
  std::unique_ptr<opennod::Channel> server_end;
  std::jthread thread;
  InProcessServer(opennod::Backend& impl, std::unique_ptr<opennod::Channel>& client_end) {
    auto [a, b] = opennod::make_channel_pair();
    client_end = std::move(a);
    server_end = std::move(b);
    thread = std::jthread([this, &impl] { opennod::serve_session(*server_end, impl); });
  }
};

}  // namespace

TEST(Protocol, RequestRoundTrip) {
  const std::vector<protocol::Request> requests{
      protocol::HandshakeRequest{},
      protocol::TextEmbedRequest{{"a photo of a cat", "ünïcode"}},
      protocol::ImageEmbedRoiRequest{{7, "imgs/7.jpg"}, {{1, 2, 3, 4}, {0, 0, 5.5, 6}}, 0.1},
      protocol::SegmentBoxesRequest{{9, ""}, {{0, 0, 1, 1}}},
  };
  for (std::size_t i = 0; i < requests.size(); ++i) {
    const auto [id, back] = protocol::decode_request(protocol::encode_request(40 + i, requests[i]));
    EXPECT_EQ(id, 40 + i);
    EXPECT_EQ(back, requests[i]);
  }
}

TEST(Protocol, EnvelopeShape) {
  const auto doc = json::parse(protocol::encode_request(3, protocol::TextEmbedRequest{{"x"}}));
  EXPECT_EQ(doc["kind"], "text_embed");
  EXPECT_EQ(doc["id"], 3);
  EXPECT_EQ(doc["payload"]["texts"], json::array({"x"}));

  const auto resp = json::parse(protocol::encode_response(
      3, "text_embed", protocol::EmbeddingsResponse{{{1.0, 0.0}}}));
  EXPECT_EQ(resp["payload"]["d"], 2);
  EXPECT_EQ(resp["payload"]["embeddings"][0], "AACAPwAAAAA=");

  const auto err = json::parse(protocol::encode_response(5, "", protocol::ErrorResponse{"boom"}));
  EXPECT_EQ(err["kind"], "error");
  EXPECT_EQ(err["message"], "boom");
}

TEST(Protocol, ResponseRoundTrip) {
  {
    const auto [id, r] = protocol::decode_response(
        protocol::encode_response(1, "handshake", protocol::HandshakeResponse{1152, "m"}));
    EXPECT_EQ(id, 1u);
    EXPECT_EQ(std::get<protocol::HandshakeResponse>(r).dim, 1152u);
  }
  {
    const auto [id, r] = protocol::decode_response(
        protocol::encode_response(2, "segment_boxes",
                                  protocol::SegmentationsResponse{{{opennod::RleMask{2, 3, {0, 6}}, 0.75}}}));
    const auto& s = std::get<protocol::SegmentationsResponse>(r);
    ASSERT_EQ(s.results.size(), 1u);
    EXPECT_EQ(s.results[0].mask, (opennod::RleMask{2, 3, {0, 6}}));
    EXPECT_EQ(s.results[0].sam_score, 0.75);
  }
}

TEST(Protocol, MalformedMessagesAreParseErrors) {
  for (const char* bad : {"", "{", "[]", R"({"id": 1})", R"({"kind": "nope", "id": 1, "payload": {}})",
                          R"({"kind": "text_embed", "id": 1, "payload": {"texts": "x"}})",
                          R"({"kind": "image_embed_roi", "id": 1, "payload": {"boxes": []}})",
                          R"({"kind": "segment_boxes", "id": 1, "payload": {"image": {"id": 1}, "boxes": [[1, 1, 0, 0]]}})",
                          R"({"kind": "text_embed", "id": "one", "payload": {"texts": []}})"}) {
    EXPECT_THROW(protocol::decode_request(bad), opennod::ParseError) << bad;
  }
  for (const char* bad : {R"({"kind": "segment_boxes", "id": 1, "payload": {"results": [{"height": 2, "width": 2, "counts": [1, 2], "score": 0.5}]}})",
                          R"({"kind": "text_embed", "id": 1, "payload": {"embeddings": ["###"]}})",
                          R"({"kind": "handshake", "id": 1, "payload": {"d": 0}})",
                          R"({"kind": "segment_boxes", "id": 1, "payload": {"results": [{"height": 2, "width": 2, "counts": [4]}]}})"}) {
    EXPECT_THROW(protocol::decode_response(bad), opennod::ParseError) << bad;
  }
}

TEST(Transport, FramesSurviveSocketPair) {
  auto [a, b] = opennod::make_channel_pair();
  const std::string big(300000, 'z');
  std::jthread writer([&, &a = a] {
    a->send("hello");
    a->send("");
    a->send(big);
    a->close_send();
  });
  EXPECT_EQ(b->receive(), "hello");
  EXPECT_EQ(b->receive(), "");
  EXPECT_EQ(b->receive(), big);
  EXPECT_FALSE(b->receive().has_value());
}

TEST(Transport, TruncatedFrameIsAnError) {
  int fds[2];
  ASSERT_EQ(::socketpair(AF_UNIX, SOCK_STREAM, 0, fds), 0);
  opennod::FdChannel reader(fds[0], fds[0], true);
  const unsigned char header[4] = {0, 0, 0, 10};
  ASSERT_EQ(::write(fds[1], header, 4), 4);
  ASSERT_EQ(::write(fds[1], "abc", 3), 3);
  ::close(fds[1]);
  EXPECT_THROW(reader.receive(), opennod::BackendError);
}

TEST(Client, RoundTripThroughServer) {
  auto impl = text_backend();
  std::unique_ptr<opennod::Channel> client_end;
  InProcessServer server(impl, client_end);
  opennod::ProtocolClient client(std::move(client_end), {.max_batch = 3});
  EXPECT_EQ(client.dim(), 4u);
  EXPECT_EQ(client.model_name(), "fake");
  std::vector<std::string> texts;
  for (int i = 1; i <= 10; ++i) texts.push_back(std::string(static_cast<std::size_t>(i), 'x'));
  const auto emb = client.text_embed(texts);
  ASSERT_EQ(emb.size(), 10u);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(emb[i][0], static_cast<double>(i + 1));

  const std::vector<BBox> boxes{{5, 0, 6, 1}, {1, 0, 2, 1}, {3, 0, 4, 1}, {0, 0, 1, 1}};
  const auto roi = client.image_embed_roi({1, "p"}, boxes, 0.0);
  ASSERT_EQ(roi.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(roi[i][1], boxes[i].x1 + 1);
  const auto seg = client.segment_boxes({1, "p"}, boxes);
  ASSERT_EQ(seg.size(), 4u);
  EXPECT_DOUBLE_EQ(seg[0].sam_score, 0.05);
  EXPECT_TRUE(client.text_embed({}).empty());
}

TEST(Client, ReordersShuffledResponses) {
  auto [client_end, server_end] = opennod::make_channel_pair();
  auto impl = text_backend();
  // Reads the handshake and answers it, then collects every batch before
  // answering them in reverse order.
  std::jthread server([&, &server_end = server_end] {
    auto hello = server_end->receive();
    auto [hid, hreq] = protocol::decode_request(*hello);
    server_end->send(protocol::encode_response(hid, "handshake", opennod::dispatch(impl, hreq)));
    std::vector<std::pair<std::uint64_t, protocol::Request>> pending;
    for (int i = 0; i < 4; ++i) pending.push_back(protocol::decode_request(*server_end->receive()));
    std::reverse(pending.begin(), pending.end());
    for (const auto& [id, req] : pending) {
      server_end->send(protocol::encode_response(id, protocol::kind_of(req), opennod::dispatch(impl, req)));
    }
  });
  opennod::ProtocolClient client(std::move(client_end), {.max_batch = 2});
  std::vector<std::string> texts{"a", "bb", "ccc", "dddd", "eeeee", "ffffff", "g"};
  const auto emb = client.text_embed(texts);
  ASSERT_EQ(emb.size(), texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) EXPECT_EQ(emb[i][0], static_cast<double>(texts[i].size()));
}

TEST(Client, ErrorResponseKeepsSessionUsable) {
  auto impl = text_backend();
  impl.text = [](const std::string& t) -> Embedding {
    if (t == "bad") throw std::runtime_error("no such prompt");
    return one_hot(4, 2);
  };
  std::unique_ptr<opennod::Channel> client_end;
  InProcessServer server(impl, client_end);
  opennod::ProtocolClient client(std::move(client_end));
  try {
    client.text_embed(std::vector<std::string>{"bad"});
    FAIL();
  } catch (const opennod::BackendError& e) {
    EXPECT_NE(std::string(e.what()).find("no such prompt"), std::string::npos);
  }
  EXPECT_EQ(client.text_embed(std::vector<std::string>{"good"}).size(), 1u);
}

TEST(Client, DimensionDriftBreaksSession) {
  auto impl = text_backend();
  impl.text = [](const std::string&) { return Embedding{1, 2, 3}; };  // handshake says 4
  std::unique_ptr<opennod::Channel> client_end;
  InProcessServer server(impl, client_end);
  opennod::ProtocolClient client(std::move(client_end));
  EXPECT_THROW(client.text_embed(std::vector<std::string>{"x"}), opennod::BackendError);
  EXPECT_THROW(client.text_embed(std::vector<std::string>{"x"}), opennod::BackendError);
}

TEST(Client, ShortAnswerIsRejected) {
  auto [client_end, server_end] = opennod::make_channel_pair();
  std::jthread server([&server_end = server_end] {
    auto hello = protocol::decode_request(*server_end->receive());
    server_end->send(protocol::encode_response(hello.first, "handshake", protocol::HandshakeResponse{2, "s"}));
    auto req = protocol::decode_request(*server_end->receive());
    server_end->send(protocol::encode_response(req.first, "segment_boxes", protocol::SegmentationsResponse{}));
    server_end->receive();
  });
  opennod::ProtocolClient client(std::move(client_end));
  EXPECT_EQ(client.dim(), 2u);
  const std::vector<BBox> boxes{{0, 0, 1, 1}};
  EXPECT_THROW(client.segment_boxes({1, ""}, boxes), opennod::BackendError);
}

TEST(Client, PeerHangUpIsBackendError) {
  auto [client_end, server_end] = opennod::make_channel_pair();
  server_end.reset();
  opennod::ProtocolClient client(std::move(client_end));
  EXPECT_THROW(client.dim(), opennod::BackendError);
}

TEST(Server, ProtocolViolationGetsErrorResponse) {
  auto impl = text_backend();
  auto [client_end, server_end] = opennod::make_channel_pair();
  std::jthread server([&, &server_end = server_end] { opennod::serve_session(*server_end, impl); });
  client_end->send("{not json");
  const auto [id, r] = protocol::decode_response(*client_end->receive());
  EXPECT_EQ(id, 0u);
  EXPECT_TRUE(std::holds_alternative<protocol::ErrorResponse>(r));
  client_end->close_send();
}

TEST(Endpoint, ExecStubBackend) {
  const auto dir = testing_support::fixture_dir();
  auto backend = opennod::connect_backend(testing_support::stub_endpoint(dir));
  const std::size_t d = backend->dim();
  EXPECT_GE(d, 7u);
  EXPECT_EQ(backend->model_name(), "stub-v1");
  const auto e = backend->text_embed(std::vector<std::string>{"a photo of a cat"});
  ASSERT_EQ(e.size(), 1u);
  EXPECT_EQ(e[0].size(), d);
  std::vector<BBox> boxes(300, BBox{1, 1, 20, 20});
  const auto seg = backend->segment_boxes({1, "000001.jpg"}, boxes);
  EXPECT_EQ(seg.size(), 300u);
  const auto roi = backend->image_embed_roi({1, "000001.jpg"}, boxes, 0.0);
  for (const auto& v : roi) EXPECT_EQ(v.size(), d);
}

TEST(Endpoint, TcpSession) {
  const int listener = ::socket(AF_INET, SOCK_STREAM, 0);
  ASSERT_GE(listener, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  ASSERT_EQ(::bind(listener, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)), 0);
  ASSERT_EQ(::listen(listener, 1), 0);
  socklen_t len = sizeof(addr);
  ::getsockname(listener, reinterpret_cast<sockaddr*>(&addr), &len);
  const int port = ntohs(addr.sin_port);

  auto impl = text_backend();
  std::jthread server([&] {
    const int conn = ::accept(listener, nullptr, nullptr);
    opennod::FdChannel channel(conn, conn, true);
    opennod::serve_session(channel, impl);
  });
  {
    auto backend = opennod::connect_backend("tcp://127.0.0.1:" + std::to_string(port));
    EXPECT_EQ(backend->dim(), 4u);
    EXPECT_EQ(backend->text_embed(std::vector<std::string>{"abc"})[0][0], 3.0);
  }
  server.join();
  ::close(listener);
}

TEST(Endpoint, BadEndpoints) {
  EXPECT_THROW(opennod::connect_backend("http://x"), opennod::BackendError);
  EXPECT_THROW(opennod::connect_backend("tcp://nohostport"), opennod::BackendError);
  EXPECT_THROW(opennod::connect_backend("exec:"), opennod::BackendError);
  EXPECT_THROW(opennod::connect_backend("tcp://127.0.0.1:1"), opennod::BackendError);
  EXPECT_THROW(opennod::connect_backend("exec:/nonexistent/program")->dim(), opennod::BackendError);
}
