#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <thread>

// Eigen (via gateway.hpp) must precede httplib: <resolv.h> defines a `_res` macro.
#include "macrocast/gateway.hpp"
#include "httplib.h"

extern char** environ;

namespace macrocast {

namespace {

using Clock = std::chrono::steady_clock;

class SubprocessAdapter final : public Adapter {
 public:
  SubprocessAdapter(const std::string& command, std::chrono::milliseconds startup_timeout) : command_(command) {
    struct sigaction sa {};
    sa.sa_handler = SIG_IGN;
    sigaction(SIGPIPE, &sa, nullptr);  // a dead adapter must surface as EPIPE, not kill us

    int to_child[2], from_child[2];
    if (pipe2(to_child, O_CLOEXEC) != 0) throw AdapterStartupError(std::string("pipe: ") + std::strerror(errno));
    if (pipe2(from_child, O_CLOEXEC) != 0) {
      ::close(to_child[0]);
      ::close(to_child[1]);
      throw AdapterStartupError(std::string("pipe: ") + std::strerror(errno));
    }
    posix_spawn_file_actions_t fa;
    posix_spawn_file_actions_init(&fa);
    posix_spawn_file_actions_adddup2(&fa, to_child[0], STDIN_FILENO);
    posix_spawn_file_actions_adddup2(&fa, from_child[1], STDOUT_FILENO);
    // Own process group, so shutdown reaches whatever the shell started.
    posix_spawnattr_t attr;
    posix_spawnattr_init(&attr);
    posix_spawnattr_setflags(&attr, POSIX_SPAWN_SETPGROUP);
    posix_spawnattr_setpgroup(&attr, 0);
    const char* argv[] = {"sh", "-c", command.c_str(), nullptr};
    const int rc = posix_spawn(&pid_, "/bin/sh", &fa, &attr, const_cast<char* const*>(argv), environ);
    posix_spawnattr_destroy(&attr);
    posix_spawn_file_actions_destroy(&fa);
    ::close(to_child[0]);
    ::close(from_child[1]);
    in_fd_ = to_child[1];
    out_fd_ = from_child[0];
    if (rc != 0) {
      pid_ = -1;
      shutdown();
      throw AdapterStartupError("cannot start adapter '" + command + "': " + std::strerror(rc));
    }
    std::string line;
    try {
      if (!read_line(line, Clock::now() + startup_timeout))
        throw AdapterStartupError("adapter '" + command + "' sent no handshake within " +
                                  std::to_string(startup_timeout.count()) + " ms");
      hs_ = parse_handshake(line);
    } catch (const ForecastFailure& e) {
      shutdown();
      throw AdapterStartupError("adapter '" + command + "' exited before its handshake: " + e.what());
    } catch (const ProtocolError& e) {
      shutdown();
      throw AdapterStartupError("adapter '" + command + "' sent a bad handshake: " + e.what());
    } catch (...) {
      shutdown();
      throw;
    }
  }

  ~SubprocessAdapter() override { shutdown(); }

  const Handshake& handshake() const override { return hs_; }

  AdapterReply exchange(const ForecastRequest& req, std::chrono::milliseconds timeout) override {
    const auto deadline = Clock::now() + timeout;
    {
      std::lock_guard lock(write_mu_);
      if (dead_) throw ForecastFailure(failure::crash, "adapter process is no longer running");
      const std::string line = to_wire(req) + "\n";
      std::size_t off = 0;
      while (off < line.size()) {
        const auto n = ::write(in_fd_, line.data() + off, line.size() - off);
        if (n < 0) {
          if (errno == EINTR) continue;
          dead_ = true;
          throw ForecastFailure(failure::crash, std::string("writing to adapter failed: ") + std::strerror(errno));
        }
        off += static_cast<std::size_t>(n);
      }
    }
    std::unique_lock lock(read_mu_, std::defer_lock);
    if (!lock.try_lock_until(deadline)) throw ForecastFailure(failure::timeout, "timed out waiting for the adapter");
    for (;;) {
      if (auto it = pending_.find(req.request_id); it != pending_.end()) {
        auto reply = std::move(it->second);
        pending_.erase(it);
        return reply;
      }
      std::string line;
      if (!read_line(line, deadline))
        throw ForecastFailure(failure::timeout,
                              "no response to " + req.request_id + " within " + std::to_string(timeout.count()) + " ms");
      AdapterReply reply;
      try {
        reply = parse_reply(line);
      } catch (const ProtocolError& e) {
        throw ForecastFailure(failure::malformed, e.what());
      }
      if (reply.request_id == req.request_id) return reply;
      pending_[reply.request_id] = std::move(reply);
    }
  }

 private:
  // False on timeout; ForecastFailure(crash) on EOF.
  bool read_line(std::string& line, Clock::time_point deadline) {
    for (;;) {
      if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
        line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        return true;
      }
      if (dead_) throw ForecastFailure(failure::crash, "adapter process is no longer running");
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
      if (left <= 0) return false;
      pollfd p{out_fd_, POLLIN, 0};
      const int pr = ::poll(&p, 1, static_cast<int>(std::min<long long>(left, 1 << 30)));
      if (pr < 0 && errno == EINTR) continue;
      if (pr == 0) return false;
      char chunk[4096];
      const auto n = ::read(out_fd_, chunk, sizeof chunk);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) {
        dead_ = true;
        throw ForecastFailure(failure::crash, "adapter closed its output (process exited)");
      }
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

  void shutdown() {
    if (in_fd_ >= 0) ::close(in_fd_);
    if (out_fd_ >= 0) ::close(out_fd_);
    in_fd_ = out_fd_ = -1;
    if (pid_ > 0) {
      int status = 0;
      bool exited = false;
      for (int i = 0; i < 50 && !exited; ++i) {
        exited = ::waitpid(pid_, &status, WNOHANG) != 0;
        if (!exited) std::this_thread::sleep_for(std::chrono::milliseconds(10));
      }
      ::kill(-pid_, SIGKILL);  // the group may outlive the shell
      if (!exited) ::waitpid(pid_, &status, 0);
      pid_ = -1;
    }
  }

  std::string command_;
  pid_t pid_ = -1;
  int in_fd_ = -1, out_fd_ = -1;
  Handshake hs_;
  std::mutex write_mu_;
  std::timed_mutex read_mu_;
  std::string buffer_;
  std::map<std::string, AdapterReply> pending_;
  std::atomic<bool> dead_{false};
};

struct Url {
  std::string base;  // scheme://host:port
  std::string path;
};

Url split_url(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw AdapterStartupError("adapter URL '" + url + "' lacks a scheme");
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

class HttpAdapter final : public Adapter {
 public:
  HttpAdapter(const std::string& url, std::chrono::milliseconds startup_timeout) : url_(split_url(url)) {
    httplib::Client cli(url_.base);
    cli.set_connection_timeout(startup_timeout);
    cli.set_read_timeout(startup_timeout);
    const auto hs_path = (url_.path.back() == '/' ? url_.path : url_.path + "/") + "handshake";
    auto res = cli.Get(hs_path);
    if (!res) throw AdapterStartupError("cannot reach adapter at " + url + ": " + httplib::to_string(res.error()));
    if (res->status != 200)
      throw AdapterStartupError("adapter handshake at " + url + " returned HTTP " + std::to_string(res->status));
    try {
      hs_ = parse_handshake(res->body);
    } catch (const ProtocolError& e) {
      throw AdapterStartupError("adapter at " + url + " sent a bad handshake: " + e.what());
    }
  }

  const Handshake& handshake() const override { return hs_; }

  AdapterReply exchange(const ForecastRequest& req, std::chrono::milliseconds timeout) override {
    httplib::Client cli(url_.base);
    cli.set_connection_timeout(timeout);
    cli.set_read_timeout(timeout);
    cli.set_write_timeout(timeout);
    auto res = cli.Post(url_.path, to_wire(req), "application/json");
    if (!res) {
      const auto err = res.error();
      const std::string msg = "HTTP exchange failed: " + httplib::to_string(err);
      if (err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout)
        throw ForecastFailure(failure::timeout, msg);
      throw ForecastFailure(failure::crash, msg);
    }
    if (res->status != 200) throw ForecastFailure(failure::adapter_error, "adapter returned HTTP " + std::to_string(res->status));
    try {
      return parse_reply(res->body);
    } catch (const ProtocolError& e) {
      throw ForecastFailure(failure::malformed, e.what());
    }
  }

 private:
  Url url_;
  Handshake hs_;
};

class FixtureAdapter final : public Adapter {
 public:
  explicit FixtureAdapter(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ProtocolError("cannot open fixture " + path.string());
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      FixtureRecord r;
      try {
        r = parse_fixture_line(line);
      } catch (const ProtocolError& e) {
        throw ProtocolError("fixture " + path.string() + " line " + std::to_string(line_no) + ": " + e.what());
      }
      const auto expect = CacheKey{r.model, r.series_id, r.origin, r.horizon, r.history_sha256}.digest();
      if (expect != r.key)
        throw ProtocolError("fixture " + path.string() + " line " + std::to_string(line_no) +
                            ": key does not match its request fields");
      if (records_.empty())
        hs_.model_info = r.model;
      else if (!(hs_.model_info == r.model))
        throw ProtocolError("fixture " + path.string() + " mixes models");
      records_[r.key] = std::move(r);
    }
    if (records_.empty()) throw ProtocolError("fixture " + path.string() + " has no records");
    hs_.role = "fixture";
  }

  const Handshake& handshake() const override { return hs_; }

  AdapterReply exchange(const ForecastRequest& req, std::chrono::milliseconds) override {
    const auto key = CacheKey::of(hs_.model_info, req);
    auto it = records_.find(key.digest());
    if (it == records_.end())
      throw ForecastFailure(failure::fixture_miss, "no recorded response for " + req.series_id + " at origin " +
                                                       key.origin.to_string() + " horizon " + std::to_string(req.horizon));
    const auto& r = it->second;
    if (r.series_id != req.series_id || r.origin != key.origin || r.horizon != req.horizon ||
        r.history_sha256 != key.history_sha256)
      throw ForecastFailure(failure::adapter_error, "fixture key collision for " + req.request_id);
    auto reply = parse_reply(r.response_line);
    reply.request_id = req.request_id;
    reply.response->request_id = req.request_id;
    return reply;
  }

 private:
  Handshake hs_;
  std::map<std::string, FixtureRecord> records_;
};

}  // namespace

std::unique_ptr<Adapter> make_subprocess_adapter(const std::string& command, std::chrono::milliseconds startup_timeout) {
  return std::make_unique<SubprocessAdapter>(command, startup_timeout);
}

std::unique_ptr<Adapter> make_http_adapter(const std::string& url, std::chrono::milliseconds startup_timeout) {
  return std::make_unique<HttpAdapter>(url, startup_timeout);
}

std::unique_ptr<Adapter> replay_fixture(const std::filesystem::path& path) {
  return std::make_unique<FixtureAdapter>(path);
}

FunctionAdapter::FunctionAdapter(ModelInfo info, std::function<std::string(const std::string&)> handler,
                                 int max_in_flight)
    : handler_(std::move(handler)) {
  hs_.role = "adapter";
  hs_.max_in_flight = max_in_flight;
  hs_.model_info = std::move(info);
}

AdapterReply FunctionAdapter::exchange(const ForecastRequest& req, std::chrono::milliseconds) {
  ++calls_;
  const auto line = handler_(to_wire(req));
  try {
    return parse_reply(line);
  } catch (const ProtocolError& e) {
    throw ForecastFailure(failure::malformed, e.what());
  }
}

}  // namespace macrocast
