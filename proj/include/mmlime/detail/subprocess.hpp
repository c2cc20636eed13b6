/*
 * Copyright 2026 The mmlime Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// A child process spoken to through newline-delimited messages on its
// standard input/output. Both streams share one AF_UNIX socket so writes can
// use MSG_NOSIGNAL instead of relying on a process-wide SIGPIPE disposition.

#pragma once

#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "mmlime/core.hpp"

extern char** environ;

namespace mmlime::detail {

class ChannelTimeout : public IoError {
 public:
  using IoError::IoError;
};

class ChannelClosed : public IoError {
 public:
  using IoError::IoError;
};

class ChildProcess {
 public:
  // Spawns argv[0] (looked up on PATH) with argv as its arguments.
  explicit ChildProcess(std::vector<std::string> argv) : argv_(std::move(argv)) {
    if (argv_.empty() || argv_.front().empty()) {
      throw ValidationError("empty command for child process");
    }
    int fds[2];
    if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, fds) != 0) {
      throw IoError(std::string("socketpair failed: ") + std::strerror(errno));
    }
    fd_ = fds[0];

    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, fds[1], STDIN_FILENO);
    posix_spawn_file_actions_adddup2(&actions, fds[1], STDOUT_FILENO);

    std::vector<char*> cargv;
    for (auto& a : argv_) cargv.push_back(a.data());
    cargv.push_back(nullptr);
    const int rc = ::posix_spawnp(&pid_, cargv[0], &actions, nullptr, cargv.data(), environ);
    posix_spawn_file_actions_destroy(&actions);
    ::close(fds[1]);
    if (rc != 0) {
      ::close(fd_);
      fd_ = -1;
      throw IoError("cannot spawn '" + argv_.front() + "': " + std::strerror(rc));
    }
  }

  ChildProcess(const ChildProcess&) = delete;
  ChildProcess& operator=(const ChildProcess&) = delete;

  ~ChildProcess() { terminate(); }

  const std::string& program() const { return argv_.front(); }

  // Writes `payload` completely while collecting incoming lines, until
  // `n_lines` complete lines have been received. `timeout` bounds the time
  // without any progress in either direction.
  std::vector<std::string> exchange(std::string_view payload, std::size_t n_lines,
                                    std::chrono::milliseconds timeout) {
    std::vector<std::string> lines;
    take_buffered_lines(lines, n_lines);
    std::size_t written = 0;
    while (written < payload.size() || lines.size() < n_lines) {
      pollfd p{fd_, 0, 0};
      if (lines.size() < n_lines) p.events |= POLLIN;
      if (written < payload.size()) p.events |= POLLOUT;
      const int rc = ::poll(&p, 1, static_cast<int>(timeout.count()));
      if (rc < 0) {
        if (errno == EINTR) continue;
        throw IoError(std::string("poll failed: ") + std::strerror(errno));
      }
      if (rc == 0) {
        throw ChannelTimeout("no response from '" + program() + "' within " +
                             std::to_string(timeout.count()) + " ms");
      }
      if ((p.revents & POLLIN) || (p.revents & (POLLHUP | POLLERR))) {
        if (lines.size() < n_lines) {
          read_some();
          take_buffered_lines(lines, n_lines);
        } else if (p.revents & (POLLHUP | POLLERR)) {
          throw ChannelClosed("'" + program() + "' closed its connection" + exit_note());
        }
      }
      if ((p.revents & POLLOUT) && written < payload.size()) {
        const ssize_t n = ::send(fd_, payload.data() + written, payload.size() - written,
                                 MSG_NOSIGNAL | MSG_DONTWAIT);
        if (n < 0) {
          if (errno == EAGAIN || errno == EWOULDBLOCK || errno == EINTR) continue;
          throw ChannelClosed("write to '" + program() + "' failed: " + std::strerror(errno) +
                              exit_note());
        }
        written += static_cast<std::size_t>(n);
      }
    }
    return lines;
  }

  std::string read_line(std::chrono::milliseconds timeout) {
    return exchange({}, 1, timeout).front();
  }

  // Closes our end, waits briefly for a clean exit, then escalates.
  void terminate() {
    if (fd_ >= 0) {
      ::close(fd_);
      fd_ = -1;
    }
    if (pid_ <= 0) return;
    for (int i = 0; i < 100; ++i) {
      if (reap(false)) return;
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    ::kill(pid_, SIGTERM);
    for (int i = 0; i < 50; ++i) {
      if (reap(false)) return;
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    ::kill(pid_, SIGKILL);
    reap(true);
  }

 private:
  void read_some() {
    char chunk[65536];
    const ssize_t n = ::recv(fd_, chunk, sizeof chunk, MSG_DONTWAIT);
    if (n > 0) {
      buffer_.append(chunk, static_cast<std::size_t>(n));
      return;
    }
    if (n == 0) {
      throw ChannelClosed("'" + program() + "' closed its output" + exit_note());
    }
    if (errno == EAGAIN || errno == EWOULDBLOCK || errno == EINTR) return;
    throw ChannelClosed("read from '" + program() + "' failed: " + std::strerror(errno));
  }

  void take_buffered_lines(std::vector<std::string>& lines, std::size_t n_lines) {
    std::size_t start = 0;
    while (lines.size() < n_lines) {
      const auto nl = buffer_.find('\n', start);
      if (nl == std::string::npos) break;
      std::string line = buffer_.substr(start, nl - start);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      start = nl + 1;
      if (line.empty()) continue;
      lines.push_back(std::move(line));
    }
    buffer_.erase(0, start);
  }

  bool reap(bool block) {
    int status = 0;
    const pid_t r = ::waitpid(pid_, &status, block ? 0 : WNOHANG);
    if (r == pid_ || (r < 0 && errno == ECHILD)) {
      pid_ = -1;
      exit_status_ = status;
      return true;
    }
    return false;
  }

  std::string exit_note() {
    for (int i = 0; i < 20 && pid_ > 0; ++i) {
      if (reap(false)) break;
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    if (pid_ > 0) return "";
    if (WIFEXITED(exit_status_)) {
      return " (exit status " + std::to_string(WEXITSTATUS(exit_status_)) + ")";
    }
    if (WIFSIGNALED(exit_status_)) {
      return " (killed by signal " + std::to_string(WTERMSIG(exit_status_)) + ")";
    }
    return "";
  }

  std::vector<std::string> argv_;
  int fd_ = -1;
  pid_t pid_ = -1;
  int exit_status_ = 0;
  std::string buffer_;
};

// Splits a command line on white space; no quoting rules beyond that.
inline std::vector<std::string> split_command(std::string_view command) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : command) {
    if (c == ' ' || c == '\t') {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

}  // namespace mmlime::detail
