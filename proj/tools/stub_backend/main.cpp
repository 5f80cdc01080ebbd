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

// Serves the stub model on stdio (default) or on a TCP port, one session per
// connection.

#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <iostream>
#include <thread>

#include "opennod/backend.hpp"
#include "opennod/transport.hpp"
#include "stub_backend.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Deterministic stub model backend for opennod"};
  std::string vocab_path;
  std::string scene_path;
  opennod::stub::StubOptions options;
  std::vector<std::int64_t> fail_images;
  int port = 0;
  app.add_option("--vocab", vocab_path, "Class vocabulary (vocab.json)")->required();
  app.add_option("--scene", scene_path, "Scene annotations in gt.json layout")->required();
  app.add_option("--dim", options.dim, "Embedding dimension (raised to |C|+1 if smaller)");
  app.add_option("--noise", options.noise, "Noise amplitude added to every embedding");
  app.add_option("--seed", options.seed, "Noise seed");
  app.add_option("--model", options.model, "Model name reported at handshake; also salts the noise");
  app.add_option("--fail-image", fail_images, "Answer requests for this image id with an error");
  app.add_option("--port", port, "Listen on this TCP port instead of stdio");
  CLI11_PARSE(app, argc, argv);
  options.fail_images.insert(fail_images.begin(), fail_images.end());

  try {
    const auto vocab = opennod::load_vocabulary(vocab_path);
    const auto scene = opennod::load_ground_truth(scene_path, &vocab);
    if (port == 0) {
      opennod::stub::StubBackend backend(vocab, scene, options);
      auto channel = opennod::stdio_channel();
      opennod::serve_session(*channel, backend);
      return 0;
    }
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    const int yes = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(static_cast<std::uint16_t>(port));
    if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 || ::listen(fd, 16) != 0) {
      std::cerr << "opennod-stub-backend: cannot listen on port " << port << "\n";
      return 1;
    }
    std::cerr << "opennod-stub-backend: listening on 127.0.0.1:" << port << std::endl;
    for (;;) {
      const int conn = ::accept(fd, nullptr, nullptr);
      if (conn < 0) continue;
      std::thread([conn, vocab, scene, options] {
        opennod::stub::StubBackend backend(vocab, scene, options);
        opennod::FdChannel channel(conn, conn, true);
        try {
          opennod::serve_session(channel, backend);
        } catch (const std::exception& e) {
          std::cerr << "opennod-stub-backend: session ended: " << e.what() << "\n";
        }
      }).detach();
    }
  } catch (const std::exception& e) {
    std::cerr << "opennod-stub-backend: " << e.what() << "\n";
    return 1;
  }
}
