// Copyright spanret contributors. SPDX-License-Identifier: Apache-2.0
#pragma once

#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "spanret/corpus.hpp"
#include "spanret/errors.hpp"
#include "spanret/model.hpp"

namespace spanret {

// Line-delimited JSON session with a child process spawned via
// `/bin/sh -c command`. One request at a time; responses must arrive in
// request order. Timeouts and child death surface as session_error,
// malformed replies as protocol_error. Not shareable across threads.
class line_protocol_session {
 public:
  explicit line_protocol_session(const std::string& command, int timeout_ms = 10000)
      : timeout_ms_(timeout_ms) {
    int to_child[2], from_child[2];
    if (pipe(to_child) != 0 || pipe(from_child) != 0)
      throw session_error("external model: pipe failed");
    pid_ = fork();
    if (pid_ < 0) throw session_error("external model: fork failed");
    if (pid_ == 0) {
      setpgid(0, 0);  // own process group, so teardown reaches grandchildren
      dup2(to_child[0], 0);
      dup2(from_child[1], 1);
      close(to_child[0]);
      close(to_child[1]);
      close(from_child[0]);
      close(from_child[1]);
      execl("/bin/sh", "sh", "-c", command.c_str(), nullptr);
      _exit(127);
    }
    setpgid(pid_, pid_);  // mirror of the child's call; loser of the race is a no-op
    close(to_child[0]);
    close(from_child[1]);
    out_fd_ = to_child[1];
    in_fd_ = from_child[0];
    signal(SIGPIPE, SIG_IGN);
    try {
      handshake();
    } catch (...) {
      cleanup();
      throw;
    }
  }

  line_protocol_session(const line_protocol_session&) = delete;
  line_protocol_session& operator=(const line_protocol_session&) = delete;

  ~line_protocol_session() { cleanup(); }

  // Sends one request object (the "id" field is added here) and returns
  // the matching reply, enforcing in-order ids.
  nlohmann::json round_trip(nlohmann::json request) {
    const std::uint64_t id = next_id_++;
    request["id"] = id;
    send_line(request.dump());
    nlohmann::json reply = read_json_line();
    if (!reply.contains("id") || !reply["id"].is_number_unsigned() ||
        reply["id"].get<std::uint64_t>() != id)
      throw protocol_error("external model: reply out of order for request id " +
                           std::to_string(id));
    return reply;
  }

 private:
  void cleanup() noexcept {
    if (out_fd_ >= 0) close(out_fd_);
    if (in_fd_ >= 0) close(in_fd_);
    out_fd_ = in_fd_ = -1;
    if (pid_ > 0) {
      int status = 0;
      for (int i = 0; i < 50; ++i) {
        if (waitpid(pid_, &status, WNOHANG) != 0) {
          pid_ = -1;
          return;
        }
        usleep(10000);
      }
      kill(-pid_, SIGKILL);  // entire group: sh -c may have spawned its own children
      waitpid(pid_, &status, 0);
      pid_ = -1;
    }
  }

  void handshake() {
    nlohmann::json hello = {{"hello", 1}, {"alphabet", k_alphabet}};
    send_line(hello.dump());
    nlohmann::json reply;
    try {
      reply = read_json_line();
    } catch (const protocol_error& e) {
      throw session_error(std::string("external model: handshake failed: ") + e.what());
    }
    if (!(reply.contains("ready") && reply["ready"].is_boolean() && reply["ready"].get<bool>()))
      throw session_error("external model: handshake failed, expected {\"ready\": true}");
  }

  void send_line(const std::string& line) {
    std::string payload = line + "\n";
    std::size_t off = 0;
    while (off < payload.size()) {
      ssize_t w = write(out_fd_, payload.data() + off, payload.size() - off);
      if (w < 0) {
        if (errno == EINTR) continue;
        throw session_error("external model: process not accepting input");
      }
      off += w;
    }
  }

  std::string read_line() {
    for (;;) {
      auto nl = buf_.find('\n');
      if (nl != std::string::npos) {
        std::string line = buf_.substr(0, nl);
        buf_.erase(0, nl + 1);
        return line;
      }
      pollfd pfd{in_fd_, POLLIN, 0};
      int pr = poll(&pfd, 1, timeout_ms_);
      if (pr == 0) throw session_error("external model: timed out waiting for reply");
      if (pr < 0) {
        if (errno == EINTR) continue;
        throw session_error("external model: poll failed");
      }
      char chunk[4096];
      ssize_t r = read(in_fd_, chunk, sizeof(chunk));
      if (r < 0) {
        if (errno == EINTR) continue;
        throw session_error("external model: read failed");
      }
      if (r == 0) throw session_error("external model: process closed its output");
      buf_.append(chunk, r);
    }
  }

  nlohmann::json read_json_line() {
    const std::string line = read_line();
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw protocol_error("external model: reply is not valid JSON: " + line);
    return j;
  }

  pid_t pid_ = -1;
  int out_fd_ = -1;
  int in_fd_ = -1;
  int timeout_ms_;
  std::uint64_t next_id_ = 0;
  std::string buf_;
};

// token_model backed by an external process speaking the line protocol.
class external_model : public token_model {
 public:
  explicit external_model(const std::string& command, int timeout_ms = 10000)
      : session_(command, timeout_ms) {}

  std::vector<double> raw_logprobs(std::span<const symbol_t> context,
                                   std::span<const symbol_t> candidates) override {
    nlohmann::json req = {{"context", std::vector<int>(context.begin(), context.end())},
                          {"candidates", std::vector<int>(candidates.begin(), candidates.end())}};
    nlohmann::json reply = session_.round_trip(std::move(req));
    const std::uint64_t id = reply["id"].get<std::uint64_t>();
    if (!reply.contains("logprobs") || !reply["logprobs"].is_array())
      throw protocol_error("external model: request " + std::to_string(id) +
                           " reply has no logprobs array");
    const auto& arr = reply["logprobs"];
    if (arr.size() != candidates.size())
      throw protocol_error("external model: request " + std::to_string(id) + " returned " +
                           std::to_string(arr.size()) + " logprobs for " +
                           std::to_string(candidates.size()) + " candidates");
    std::vector<double> out;
    out.reserve(arr.size());
    for (const auto& v : arr) {
      if (!v.is_number())
        throw protocol_error("external model: request " + std::to_string(id) +
                             " has a non-numeric logprob");
      const double d = v.get<double>();
      if (!std::isfinite(d))
        throw protocol_error("external model: request " + std::to_string(id) +
                             " has a non-finite logprob");
      out.push_back(d);
    }
    return out;
  }

 private:
  line_protocol_session session_;
};

// Element extractor backed by the same protocol, carrying text instead of
// symbols: {"id", "text"} -> {"id", "elements": [strings]}.
class external_extractor_session {
 public:
  explicit external_extractor_session(const std::string& command, int timeout_ms = 10000)
      : session_(command, timeout_ms) {}

  std::vector<std::string> extract(const std::string& text) {
    nlohmann::json reply = session_.round_trip({{"text", text}});
    const std::uint64_t id = reply["id"].get<std::uint64_t>();
    if (!reply.contains("elements") || !reply["elements"].is_array())
      throw protocol_error("external extractor: request " + std::to_string(id) +
                           " reply has no elements array");
    std::vector<std::string> out;
    for (const auto& v : reply["elements"]) {
      if (!v.is_string())
        throw protocol_error("external extractor: request " + std::to_string(id) +
                             " has a non-string element");
      out.push_back(v.get<std::string>());
    }
    return out;
  }

 private:
  line_protocol_session session_;
};

}  // namespace spanret
