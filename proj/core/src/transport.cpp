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

#include "opennod/transport.hpp"

#include <netdb.h>
#include <signal.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <mutex>

#include "opennod/errors.hpp"
#include "opennod/protocol.hpp"

extern char** environ;

namespace opennod {

namespace {

void ignore_sigpipe() {
  static std::once_flag once;
  std::call_once(once, [] { ::signal(SIGPIPE, SIG_IGN); });
}

std::string errno_text(const char* what) { return std::string(what) + ": " + std::strerror(errno); }

void write_all(int fd, const char* data, std::size_t n) {
  while (n > 0) {
    const ssize_t w = ::write(fd, data, n);
    if (w < 0) {
      if (errno == EINTR) continue;
      throw BackendError(errno_text("write to backend failed"));
    }
    data += w;
    n -= static_cast<std::size_t>(w);
  }
}

// Returns bytes read; fewer than n only at end-of-stream.
std::size_t read_all(int fd, char* data, std::size_t n) {
  std::size_t got = 0;
  while (got < n) {
    const ssize_t r = ::read(fd, data + got, n - got);
    if (r < 0) {
      if (errno == EINTR) continue;
      throw BackendError(errno_text("read from backend failed"));
    }
    if (r == 0) break;
    got += static_cast<std::size_t>(r);
  }
  return got;
}

}  // namespace

FdChannel::FdChannel(int read_fd, int write_fd, bool owns_fds, pid_t child)
    : read_fd_(read_fd), write_fd_(write_fd), owns_(owns_fds), child_(child) {
  ignore_sigpipe();
}

FdChannel::~FdChannel() {
  if (owns_) {
    if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
    if (read_fd_ >= 0) ::close(read_fd_);
  }
  if (child_ > 0) {
    int status = 0;
    while (::waitpid(child_, &status, 0) < 0 && errno == EINTR) {
    }
  }
}

void FdChannel::send(std::string_view message) {
  if (write_fd_ < 0) throw BackendError("channel send half is closed");
  if (message.size() > protocol::kMaxFrameBytes) throw BackendError("message exceeds maximum frame size");
  const auto n = static_cast<std::uint32_t>(message.size());
  const char header[protocol::kFrameHeaderBytes] = {static_cast<char>((n >> 24) & 0xff), static_cast<char>((n >> 16) & 0xff),
                                                    static_cast<char>((n >> 8) & 0xff), static_cast<char>(n & 0xff)};
  write_all(write_fd_, header, sizeof(header));
  write_all(write_fd_, message.data(), message.size());
}

std::optional<std::string> FdChannel::receive() {
  unsigned char header[protocol::kFrameHeaderBytes];
  const std::size_t got = read_all(read_fd_, reinterpret_cast<char*>(header), sizeof(header));
  if (got == 0) return std::nullopt;
  if (got < sizeof(header)) throw BackendError("stream ended inside a frame header");
  const std::size_t n = (std::size_t{header[0]} << 24) | (std::size_t{header[1]} << 16) |
                        (std::size_t{header[2]} << 8) | std::size_t{header[3]};
  if (n > protocol::kMaxFrameBytes) throw BackendError("incoming frame exceeds maximum size");
  std::string body(n, '\0');
  if (read_all(read_fd_, body.data(), n) < n) throw BackendError("stream ended inside a frame body");
  return body;
}

void FdChannel::close_send() {
  if (write_fd_ < 0) return;
  if (write_fd_ == read_fd_) {
    ::shutdown(write_fd_, SHUT_WR);
  } else if (owns_) {
    ::close(write_fd_);
  }
  write_fd_ = -1;
}

std::unique_ptr<Channel> connect_tcp(const std::string& host, const std::string& port) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (const int rc = ::getaddrinfo(host.c_str(), port.c_str(), &hints, &res); rc != 0) {
    throw BackendError("cannot resolve " + host + ":" + port + ": " + ::gai_strerror(rc));
  }
  int fd = -1;
  for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) throw BackendError("cannot connect to " + host + ":" + port);
  return std::make_unique<FdChannel>(fd, fd, true);
}

std::unique_ptr<Channel> spawn_process(const std::vector<std::string>& argv) {
  if (argv.empty()) throw BackendError("empty backend command");
  int to_child[2];
  int from_child[2];
  if (::pipe(to_child) != 0) throw BackendError(errno_text("pipe"));
  if (::pipe(from_child) != 0) {
    ::close(to_child[0]);
    ::close(to_child[1]);
    throw BackendError(errno_text("pipe"));
  }
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, to_child[0], STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&actions, from_child[1], STDOUT_FILENO);
  for (const int fd : {to_child[0], to_child[1], from_child[0], from_child[1]}) {
    posix_spawn_file_actions_addclose(&actions, fd);
  }
  std::vector<char*> args;
  for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
  args.push_back(nullptr);
  pid_t pid = -1;
  const int rc = ::posix_spawnp(&pid, args[0], &actions, nullptr, args.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  ::close(to_child[0]);
  ::close(from_child[1]);
  if (rc != 0) {
    ::close(to_child[1]);
    ::close(from_child[0]);
    throw BackendError("cannot spawn backend \"" + argv[0] + "\": " + std::strerror(rc));
  }
  return std::make_unique<FdChannel>(from_child[0], to_child[1], true, pid);
}

std::unique_ptr<Channel> stdio_channel() {
  return std::make_unique<FdChannel>(STDIN_FILENO, STDOUT_FILENO, false);
}

std::pair<std::unique_ptr<Channel>, std::unique_ptr<Channel>> make_channel_pair() {
  int fds[2];
  if (::socketpair(AF_UNIX, SOCK_STREAM, 0, fds) != 0) throw BackendError(errno_text("socketpair"));
  return {std::make_unique<FdChannel>(fds[0], fds[0], true), std::make_unique<FdChannel>(fds[1], fds[1], true)};
}

}  // namespace opennod
