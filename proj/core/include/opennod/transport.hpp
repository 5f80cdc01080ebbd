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

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <sys/types.h>
#include <vector>

namespace opennod {

/// A bidirectional byte stream carrying length-prefixed messages.
/// send() and receive() may be called from different threads; two concurrent
/// senders (or receivers) are not supported.
class Channel {
 public:
  virtual ~Channel() = default;
  virtual void send(std::string_view message) = 0;
  /// Empty optional on a clean end-of-stream at a frame boundary.
  virtual std::optional<std::string> receive() = 0;
  /// Closes the sending half so the peer sees end-of-stream.
  virtual void close_send() = 0;
};

/// Framed channel over a pair of file descriptors. Owned descriptors are
/// closed on destruction; a child pid, when set, is reaped after closing.
class FdChannel final : public Channel {
 public:
  FdChannel(int read_fd, int write_fd, bool owns_fds, pid_t child = -1);
  ~FdChannel() override;
  FdChannel(const FdChannel&) = delete;
  FdChannel& operator=(const FdChannel&) = delete;

  void send(std::string_view message) override;
  std::optional<std::string> receive() override;
  void close_send() override;

 private:
  int read_fd_;
  int write_fd_;
  bool owns_;
  pid_t child_;
};

/// Connects to host:port over TCP.
std::unique_ptr<Channel> connect_tcp(const std::string& host, const std::string& port);

/// Spawns `argv` with its stdin/stdout connected to the returned channel.
/// stderr is inherited.
std::unique_ptr<Channel> spawn_process(const std::vector<std::string>& argv);

/// Channel over this process's stdin/stdout (server side of a spawned backend).
std::unique_ptr<Channel> stdio_channel();

/// An in-memory connected pair, one end per side. Used for tests and
/// in-process servers.
std::pair<std::unique_ptr<Channel>, std::unique_ptr<Channel>> make_channel_pair();

}  // namespace opennod
