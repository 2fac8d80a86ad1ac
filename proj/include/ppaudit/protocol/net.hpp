// Copyright 2026 The ppaudit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Line-delimited TCP transport for the audit protocol: a thread-per-connection
// server in front of a Platform, and a blocking client.

#pragma once

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstdint>
#include <cstring>
#include <list>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "absl/strings/string_view.h"
#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "ppaudit/protocol/messages.hpp"
#include "ppaudit/protocol/platform.hpp"
#include "ppaudit/status.hpp"

namespace ppaudit::protocol {

// Upper bound on one message; an upload of a million identifiers fits.
inline constexpr size_t kMaxLineBytes = size_t{64} << 20;

struct Endpoint {
  std::string host = "127.0.0.1";
  uint16_t port = 0;

  std::string ToString() const { return absl::StrCat(host, ":", port); }
};

inline absl::StatusOr<Endpoint> ParseEndpoint(absl::string_view text) {
  auto colon = text.rfind(':');
  if (colon == absl::string_view::npos || colon == 0) {
    return MakeError(ErrorKind::kConfig,
                     absl::StrCat("endpoint '", text, "' must look like host:port"));
  }
  uint32_t port = 0;
  if (!absl::SimpleAtoi(text.substr(colon + 1), &port) || port > 65535) {
    return MakeError(ErrorKind::kConfig, absl::StrCat("bad port in endpoint '", text, "'"));
  }
  return Endpoint{std::string(text.substr(0, colon)), static_cast<uint16_t>(port)};
}

namespace internal {

class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(Socket&& other) noexcept : fd_(std::exchange(other.fd_, -1)) {}
  Socket& operator=(Socket&& other) noexcept {
    if (this != &other) {
      Close();
      fd_ = std::exchange(other.fd_, -1);
    }
    return *this;
  }
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  ~Socket() { Close(); }

  int fd() const { return fd_; }
  bool valid() const { return fd_ >= 0; }

  void Close() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

 private:
  int fd_ = -1;
};

inline absl::Status Errno(absl::string_view what) {
  return MakeError(ErrorKind::kTransport, absl::StrCat(what, ": ", std::strerror(errno)));
}

inline absl::Status WriteAll(int fd, absl::string_view data) {
  while (!data.empty()) {
    ssize_t written = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
    if (written < 0) {
      if (errno == EINTR) continue;
      return Errno("send");
    }
    data.remove_prefix(static_cast<size_t>(written));
  }
  return absl::OkStatus();
}

// Buffered reader yielding '\n'-terminated lines.
class LineReader {
 public:
  explicit LineReader(int fd) : fd_(fd) {}

  // NotFound at clean end of stream.
  absl::StatusOr<std::string> ReadLine() {
    while (true) {
      auto newline = buffer_.find('\n', scanned_);
      if (newline != std::string::npos) {
        std::string line = buffer_.substr(0, newline);
        buffer_.erase(0, newline + 1);
        scanned_ = 0;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
      }
      scanned_ = buffer_.size();
      if (buffer_.size() > kMaxLineBytes) {
        return MakeError(ErrorKind::kMalformedMessage, "message exceeds the size limit");
      }
      char chunk[65536];
      ssize_t got = ::recv(fd_, chunk, sizeof(chunk), 0);
      if (got < 0) {
        if (errno == EINTR) continue;
        return Errno("recv");
      }
      if (got == 0) return absl::NotFoundError("connection closed");
      buffer_.append(chunk, static_cast<size_t>(got));
    }
  }

 private:
  int fd_;
  std::string buffer_;
  size_t scanned_ = 0;
};

inline absl::StatusOr<Socket> ConnectTo(const Endpoint& endpoint) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* found = nullptr;
  const std::string port = std::to_string(endpoint.port);
  if (int rc = ::getaddrinfo(endpoint.host.c_str(), port.c_str(), &hints, &found); rc != 0) {
    return MakeError(ErrorKind::kTransport,
                     absl::StrCat("resolve ", endpoint.ToString(), ": ", ::gai_strerror(rc)));
  }
  std::unique_ptr<addrinfo, decltype(&::freeaddrinfo)> guard(found, &::freeaddrinfo);
  for (addrinfo* ai = found; ai != nullptr; ai = ai->ai_next) {
    Socket s(::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol));
    if (!s.valid()) continue;
    if (::connect(s.fd(), ai->ai_addr, ai->ai_addrlen) == 0) {
      int one = 1;
      ::setsockopt(s.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
      return s;
    }
  }
  return MakeError(ErrorKind::kTransport,
                   absl::StrCat("cannot connect to ", endpoint.ToString(), ": ",
                                std::strerror(errno)));
}

}  // namespace internal

// Serves a Platform on a TCP address. Each connection gets its own thread
// and may send any number of requests; a malformed line is answered with an
// error message and the connection stays open.
class Server {
 public:
  static absl::StatusOr<std::unique_ptr<Server>> Start(Platform& platform,
                                                       const Endpoint& listen) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    hints.ai_flags = AI_PASSIVE;
    addrinfo* found = nullptr;
    const std::string port = std::to_string(listen.port);
    if (int rc = ::getaddrinfo(listen.host.c_str(), port.c_str(), &hints, &found); rc != 0) {
      return MakeError(ErrorKind::kTransport,
                       absl::StrCat("resolve ", listen.ToString(), ": ", ::gai_strerror(rc)));
    }
    std::unique_ptr<addrinfo, decltype(&::freeaddrinfo)> guard(found, &::freeaddrinfo);
    internal::Socket socket(::socket(found->ai_family, found->ai_socktype, found->ai_protocol));
    if (!socket.valid()) return internal::Errno("socket");
    int one = 1;
    ::setsockopt(socket.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    if (::bind(socket.fd(), found->ai_addr, found->ai_addrlen) != 0) {
      return internal::Errno(absl::StrCat("bind ", listen.ToString()));
    }
    if (::listen(socket.fd(), 64) != 0) return internal::Errno("listen");
    sockaddr_storage bound{};
    socklen_t length = sizeof(bound);
    ::getsockname(socket.fd(), reinterpret_cast<sockaddr*>(&bound), &length);
    uint16_t bound_port = bound.ss_family == AF_INET6
                              ? ntohs(reinterpret_cast<sockaddr_in6*>(&bound)->sin6_port)
                              : ntohs(reinterpret_cast<sockaddr_in*>(&bound)->sin_port);
    std::unique_ptr<Server> server(
        new Server(platform, std::move(socket), Endpoint{listen.host, bound_port}));
    server->acceptor_ = std::thread([s = server.get()] { s->AcceptLoop(); });
    return server;
  }

  ~Server() { Stop(); }

  const Endpoint& endpoint() const { return endpoint_; }

  // Closes the listener and every open connection, then joins all threads.
  void Stop() {
    if (stopping_.exchange(true)) return;
    ::shutdown(listener_.fd(), SHUT_RDWR);
    if (acceptor_.joinable()) acceptor_.join();
    std::list<Connection> connections;
    {
      std::lock_guard<std::mutex> lock(mu_);
      for (auto& c : connections_) ::shutdown(c.socket.fd(), SHUT_RDWR);
      connections.swap(connections_);
    }
    for (auto& c : connections) {
      if (c.thread.joinable()) c.thread.join();
    }
    listener_.Close();
  }

 private:
  struct Connection {
    internal::Socket socket;
    std::thread thread;
  };

  Server(Platform& platform, internal::Socket listener, Endpoint endpoint)
      : platform_(platform), listener_(std::move(listener)), endpoint_(std::move(endpoint)) {}

  void AcceptLoop() {
    while (!stopping_) {
      int fd = ::accept(listener_.fd(), nullptr, nullptr);
      if (fd < 0) {
        if (errno == EINTR) continue;
        return;
      }
      std::lock_guard<std::mutex> lock(mu_);
      if (stopping_) {
        ::close(fd);
        return;
      }
      connections_.push_back(Connection{internal::Socket(fd), {}});
      Connection& c = connections_.back();
      c.thread = std::thread([this, fd] { Serve(fd); });
    }
  }

  void Serve(int fd) {
    internal::LineReader reader(fd);
    while (true) {
      auto line = reader.ReadLine();
      if (!line.ok()) {
        if (ErrorKindOf(line.status()) == ErrorKind::kMalformedMessage) {
          (void)internal::WriteAll(fd, ErrorToJson(line.status()).dump(-1, ' ', false, Json::error_handler_t::replace) + "\n");
        }
        return;
      }
      if (line->empty()) continue;
      if (!internal::WriteAll(fd, platform_.HandleLine(*line) + "\n").ok()) return;
    }
  }

  Platform& platform_;
  internal::Socket listener_;
  Endpoint endpoint_;
  std::atomic<bool> stopping_{false};
  std::thread acceptor_;
  std::mutex mu_;
  std::list<Connection> connections_;
};

// Blocking, sequential client. Server-side errors come back as typed
// statuses (ErrorKindOf), transport failures as ErrorKind::kTransport.
class Client {
 public:
  static absl::StatusOr<Client> Connect(const Endpoint& endpoint) {
    PPAUDIT_ASSIGN_OR_RETURN(internal::Socket socket, internal::ConnectTo(endpoint));
    return Client(std::move(socket));
  }

  // Every raw line received is appended here when set (wire capture).
  void set_transcript(std::vector<std::string>* transcript) { transcript_ = transcript; }

  absl::StatusOr<Json> Call(const Json& request) {
    PPAUDIT_RETURN_IF_ERROR(internal::WriteAll(socket_.fd(), request.dump() + "\n"));
    auto line = reader_->ReadLine();
    if (!line.ok()) {
      return MakeError(ErrorKind::kTransport,
                       absl::StrCat("no response: ", line.status().message()));
    }
    if (transcript_ != nullptr) transcript_->push_back(*line);
    Json response = Json::parse(*line, nullptr, false);
    if (response.is_discarded() || !response.is_object()) {
      return MakeError(ErrorKind::kMalformedMessage, "server sent a malformed response");
    }
    if (TypeOf(response) == kError) return ParseErrorResponse(response);
    return response;
  }

  // Sends a raw line (tests use this for malformed input).
  absl::StatusOr<std::string> CallRaw(absl::string_view line) {
    PPAUDIT_RETURN_IF_ERROR(internal::WriteAll(socket_.fd(), absl::StrCat(line, "\n")));
    auto response = reader_->ReadLine();
    if (!response.ok()) return MakeError(ErrorKind::kTransport, response.status().message());
    if (transcript_ != nullptr) transcript_->push_back(*response);
    return *response;
  }

  absl::StatusOr<UploadAudienceResponse> Upload(const UploadAudienceRequest& request) {
    PPAUDIT_ASSIGN_OR_RETURN(Json response, Call(ToJson(request)));
    if (TypeOf(response) != kUploadAudienceResult) {
      return MakeError(ErrorKind::kMalformedMessage, "unexpected response type");
    }
    return ParseUploadAudienceResponse(response);
  }

  absl::StatusOr<QueryRelevanceResponse> Query(const QueryRelevanceRequest& request) {
    PPAUDIT_ASSIGN_OR_RETURN(Json response, Call(ToJson(request)));
    if (TypeOf(response) != kQueryRelevanceResult) {
      return MakeError(ErrorKind::kMalformedMessage, "unexpected response type");
    }
    return ParseQueryRelevanceResponse(response);
  }

 private:
  explicit Client(internal::Socket socket)
      : socket_(std::move(socket)),
        reader_(std::make_unique<internal::LineReader>(socket_.fd())) {}

  internal::Socket socket_;
  std::unique_ptr<internal::LineReader> reader_;
  std::vector<std::string>* transcript_ = nullptr;
};

}  // namespace ppaudit::protocol
