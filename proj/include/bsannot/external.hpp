/* Copyright 2026 The bsannot Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <thread>

#include <json.hpp>

#include "bsannot/audio.hpp"
#include "bsannot/classify.hpp"
#include "bsannot/error.hpp"

extern char** environ;

namespace bsannot {

/// "exec:<shell command>" or "tcp:<host>:<port>".
struct AdapterEndpoint {
  enum class Kind { kExec, kTcp };
  Kind kind = Kind::kExec;
  std::string command;
  std::string host;
  std::string port;

  static AdapterEndpoint parse(std::string_view text) {
    AdapterEndpoint e;
    if (text.starts_with("exec:") && text.size() > 5) {
      e.command = std::string(text.substr(5));
      return e;
    }
    if (text.starts_with("tcp:")) {
      const auto rest = text.substr(4);
      const auto colon = rest.rfind(':');
      if (colon != std::string_view::npos && colon > 0 && colon + 1 < rest.size()) {
        e.kind = Kind::kTcp;
        e.host = std::string(rest.substr(0, colon));
        e.port = std::string(rest.substr(colon + 1));
        return e;
      }
    }
    throw Error(Errc::kInvalidArgument,
                "adapter endpoint must be exec:<command> or tcp:<host>:<port>, got '" + std::string(text) + "'");
  }
};

/// Parses one reply line. Throws kMalformedReply unless it carries an id and
/// probabilities over exactly SB, MB, CRS and HS that sum to 1.
inline std::pair<std::string, ClassProbabilities> parse_adapter_reply(std::string_view line) {
  auto bad = [](const std::string& why) { return Error(Errc::kMalformedReply, "adapter reply " + why); };
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error&) {
    throw bad("is not JSON");
  }
  if (!j.is_object() || !j.contains("id") || !j["id"].is_string()) throw bad("has no string id");
  if (!j.contains("probs") || !j["probs"].is_object() || j["probs"].size() != 4) {
    throw bad("must map exactly SB, MB, CRS and HS");
  }
  std::array<double, 4> p{};
  for (PatternLabel l : kPatternLabels) {
    const auto it = j["probs"].find(std::string(label_name(l)));
    if (it == j["probs"].end() || !it->is_number()) throw bad("lacks a number for " + std::string(label_name(l)));
    p[static_cast<std::size_t>(l)] = it->get<double>();
  }
  try {
    return {j["id"].get<std::string>(), ClassProbabilities(p)};
  } catch (const Error& e) {
    throw bad(std::string("has invalid probabilities: ") + e.what());
  }
}

/// Client for an external model speaking newline-delimited JSON. Requests on
/// one adapter are serialized; open several adapters for parallel use.
class ExternalAdapter {
 public:
  using Clock = std::chrono::steady_clock;

  explicit ExternalAdapter(std::string endpoint,
                           std::chrono::milliseconds timeout = std::chrono::seconds(10))
      : text_(std::move(endpoint)), endpoint_(AdapterEndpoint::parse(text_)), timeout_(timeout) {}

  ExternalAdapter(const ExternalAdapter&) = delete;
  ExternalAdapter& operator=(const ExternalAdapter&) = delete;
  ~ExternalAdapter() { disconnect(); }

  const std::string& endpoint() const { return text_; }

  ClassProbabilities request(const AudioClip& clip) {
    std::lock_guard lock(mu_);
    const auto deadline = Clock::now() + timeout_;
    if (write_fd_ < 0) connect(deadline);
    const std::string id = "r" + std::to_string(++next_id_);
    nlohmann::json req = {{"id", id}, {"sample_rate", clip.sample_rate()}};
    req["samples"] = std::vector<double>(clip.samples().begin(), clip.samples().end());
    try {
      send_line(req.dump() + "\n", deadline);
      for (;;) {
        auto [reply_id, probs] = parse_adapter_reply(read_line(deadline));
        if (reply_id == id) return probs;
        // Late replies to requests that already timed out are dropped.
      }
    } catch (const Error& e) {
      if (e.code() == Errc::kTransport) disconnect();
      throw;
    }
  }

 private:
  [[noreturn]] void fail(const std::string& what) {
    throw Error(Errc::kTransport, "adapter " + text_ + ": " + what);
  }

  static int remaining_ms(Clock::time_point deadline) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
    return left > 0 ? static_cast<int>(left) : 0;
  }

  void connect(Clock::time_point deadline) {
    if (endpoint_.kind == AdapterEndpoint::Kind::kExec) {
      spawn();
    } else {
      dial(deadline);
    }
  }

  void spawn() {
    // A dead child must surface as a write error, not kill the process.
    ::signal(SIGPIPE, SIG_IGN);
    int to_child[2], from_child[2];
    if (::pipe2(to_child, O_CLOEXEC) != 0) fail("pipe failed");
    if (::pipe2(from_child, O_CLOEXEC) != 0) {
      ::close(to_child[0]), ::close(to_child[1]);
      fail("pipe failed");
    }
    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, to_child[0], STDIN_FILENO);
    posix_spawn_file_actions_adddup2(&actions, from_child[1], STDOUT_FILENO);
    const char* argv[] = {"sh", "-c", endpoint_.command.c_str(), nullptr};
    const int rc = posix_spawn(&child_, "/bin/sh", &actions, nullptr, const_cast<char* const*>(argv), environ);
    posix_spawn_file_actions_destroy(&actions);
    ::close(to_child[0]);
    ::close(from_child[1]);
    if (rc != 0) {
      ::close(to_child[1]), ::close(from_child[0]);
      child_ = -1;
      fail(std::string("cannot start: ") + std::strerror(rc));
    }
    write_fd_ = to_child[1];
    read_fd_ = from_child[0];
  }

  void dial(Clock::time_point deadline) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (::getaddrinfo(endpoint_.host.c_str(), endpoint_.port.c_str(), &hints, &res) != 0 || res == nullptr) {
      fail("cannot resolve host");
    }
    std::unique_ptr<addrinfo, decltype(&::freeaddrinfo)> guard(res, ::freeaddrinfo);
    for (addrinfo* a = res; a != nullptr; a = a->ai_next) {
      const int fd = ::socket(a->ai_family, a->ai_socktype | SOCK_CLOEXEC | SOCK_NONBLOCK, a->ai_protocol);
      if (fd < 0) continue;
      int rc = ::connect(fd, a->ai_addr, a->ai_addrlen);
      if (rc != 0 && errno == EINPROGRESS) {
        pollfd p{fd, POLLOUT, 0};
        if (::poll(&p, 1, remaining_ms(deadline)) == 1) {
          int err = 0;
          socklen_t len = sizeof err;
          ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len);
          rc = err == 0 ? 0 : -1;
        }
      }
      if (rc == 0) {
        write_fd_ = read_fd_ = fd;
        return;
      }
      ::close(fd);
    }
    fail("connection refused or timed out");
  }

  void disconnect() {
    if (read_fd_ >= 0 && read_fd_ != write_fd_) ::close(read_fd_);
    if (write_fd_ >= 0) ::close(write_fd_);
    read_fd_ = write_fd_ = -1;
    buffer_.clear();
    if (child_ > 0) {
      // Closing stdin asks the adapter to exit; give it a moment, then insist.
      for (int i = 0; i < 50; ++i) {
        if (::waitpid(child_, nullptr, WNOHANG) == child_) {
          child_ = -1;
          return;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
      }
      ::kill(child_, SIGKILL);
      ::waitpid(child_, nullptr, 0);
      child_ = -1;
    }
  }

  void send_line(const std::string& data, Clock::time_point deadline) {
    std::size_t off = 0;
    while (off < data.size()) {
      pollfd p{write_fd_, POLLOUT, 0};
      const int ready = ::poll(&p, 1, remaining_ms(deadline));
      if (ready == 0) throw Error(Errc::kTimeout, "adapter " + text_ + ": request timed out");
      if (ready < 0) {
        if (errno == EINTR) continue;
        fail("poll failed");
      }
      const ssize_t n = endpoint_.kind == AdapterEndpoint::Kind::kTcp
                            ? ::send(write_fd_, data.data() + off, data.size() - off, MSG_NOSIGNAL)
                            : ::write(write_fd_, data.data() + off, data.size() - off);
      if (n < 0) {
        if (errno == EINTR || errno == EAGAIN) continue;
        fail(std::string("write failed: ") + std::strerror(errno));
      }
      off += static_cast<std::size_t>(n);
    }
  }

  std::string read_line(Clock::time_point deadline) {
    for (;;) {
      const auto nl = buffer_.find('\n');
      if (nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) return line;
        continue;
      }
      pollfd p{read_fd_, POLLIN, 0};
      const int ready = ::poll(&p, 1, remaining_ms(deadline));
      if (ready == 0) throw Error(Errc::kTimeout, "adapter " + text_ + ": no reply within timeout");
      if (ready < 0) {
        if (errno == EINTR) continue;
        fail("poll failed");
      }
      char chunk[4096];
      const ssize_t n = ::read(read_fd_, chunk, sizeof chunk);
      if (n == 0) fail("connection closed");
      if (n < 0) {
        if (errno == EINTR || errno == EAGAIN) continue;
        fail(std::string("read failed: ") + std::strerror(errno));
      }
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

  std::string text_;
  AdapterEndpoint endpoint_;
  std::chrono::milliseconds timeout_;
  std::mutex mu_;
  int write_fd_ = -1;
  int read_fd_ = -1;
  pid_t child_ = -1;
  std::string buffer_;
  std::uint64_t next_id_ = 0;
};

/// Sends the event's samples to an external model.
class ExternalClassifier : public Classifier {
 public:
  explicit ExternalClassifier(std::shared_ptr<ExternalAdapter> adapter) : adapter_(std::move(adapter)) {}
  std::string id() const override { return "external:" + adapter_->endpoint(); }

  ClassProbabilities classify(const AudioClip& clip, const EventInterval& event, const ClipContext&) override {
    return adapter_->request(slice(clip, event.start_s, std::min(event.end_s, clip.duration_s())));
  }

 private:
  std::shared_ptr<ExternalAdapter> adapter_;
};

}  // namespace bsannot
