#pragma once

// Companion-UI endpoint: a TCP socket speaking newline-delimited JSON.
// Outbound state messages are coalesced per client (a slow reader only ever
// gets the newest state); inbound commands are validated here and queued for
// the tick loop, which owns the avatar.

#include <sys/socket.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <unistd.h>

#include <atomic>
#include <cstdint>
#include <deque>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "teegi/avatar.hpp"
#include "teegi/base64.hpp"
#include "teegi/net.hpp"
#include "teegi/protocol.hpp"

namespace teegi {

struct SetModeCommand {
  Mode mode;
};

struct PuppetActionCommand {
  PuppetAction action;
};

struct BridgeCommand {
  std::uint64_t client{0};
  std::variant<SetModeCommand, PuppetActionCommand> body;
};

inline std::string error_message(std::string_view reason) {
  nlohmann::ordered_json j;
  j["type"] = "error";
  j["reason"] = reason;
  return j.dump();
}

/// Validate one inbound line. Returns the command or the error reason.
inline std::variant<std::variant<SetModeCommand, PuppetActionCommand>, std::string> parse_command(std::string_view line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error&) {
    return std::string("malformed-json");
  }
  if (!j.is_object() || !j.contains("type") || !j["type"].is_string()) return std::string("missing-type");
  const auto type = j["type"].get<std::string>();
  if (type == "set_mode") {
    if (!j.contains("mode") || !j["mode"].is_string()) return std::string("missing-mode");
    const auto m = mode_from_string(j["mode"].get<std::string>());
    if (!m) return std::string("unknown-mode");
    return std::variant<SetModeCommand, PuppetActionCommand>{SetModeCommand{*m}};
  }
  if (type == "puppet_action") {
    if (!j.contains("action") || !j["action"].is_string()) return std::string("missing-action");
    const auto a = puppet_action_from_string(j["action"].get<std::string>());
    if (!a) return std::string("unknown-action");
    return std::variant<SetModeCommand, PuppetActionCommand>{PuppetActionCommand{*a}};
  }
  return std::string("unknown-type");
}

/// Outbound StateUpdate line for one tick.
inline std::string state_message(const AvatarState& s, std::uint32_t seq) {
  nlohmann::ordered_json j;
  j["type"] = "state";
  j["seq"] = seq;
  j["mode"] = to_string(s.mode);
  j["mental"] = to_string(s.mental.motor);
  j["eyes"] = s.eyes == Eyes::Closed ? "closed" : "open";
  auto servos = nlohmann::ordered_json::array();
  for (double a : s.servo_angles) servos.push_back(std::round(a * 10.0) / 10.0);
  j["servos"] = servos;
  std::vector<std::uint8_t> rgb;
  rgb.reserve(s.led_field.colors.size() * 3);
  for (const auto& c : s.led_field.colors) {
    rgb.push_back(c.r);
    rgb.push_back(c.g);
    rgb.push_back(c.b);
  }
  j["leds"] = base64_encode(rgb);
  return j.dump();
}

class UiBridge {
 public:
  static constexpr std::size_t kMaxLine = 64 * 1024;

  explicit UiBridge(const net::Endpoint& bind_to) {
    listen_ = net::Fd(::socket(AF_INET, SOCK_STREAM, 0));
    if (!listen_.valid()) throw net::sys_error("socket(tcp)");
    const int one = 1;
    ::setsockopt(listen_.get(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    const auto addr = net::resolve_ipv4(bind_to);
    if (::bind(listen_.get(), reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) < 0) {
      throw net::sys_error("bind " + bind_to.str());
    }
    if (::listen(listen_.get(), 16) < 0) throw net::sys_error("listen");
    net::set_nonblocking(listen_.get());
    int pipefd[2];
    if (::pipe(pipefd) < 0) throw net::sys_error("pipe");
    wake_read_ = net::Fd(pipefd[0]);
    wake_write_ = net::Fd(pipefd[1]);
    net::set_nonblocking(wake_read_.get());
    net::set_nonblocking(wake_write_.get());
    port_ = net::local_port(listen_.get());
    running_ = true;
    thread_ = std::thread([this] { loop(); });
  }

  ~UiBridge() {
    running_ = false;
    wake();
    if (thread_.joinable()) thread_.join();
  }

  UiBridge(const UiBridge&) = delete;
  UiBridge& operator=(const UiBridge&) = delete;

  std::uint16_t port() const noexcept { return port_; }

  std::size_t client_count() const {
    std::lock_guard lock(mutex_);
    return client_count_;
  }

  /// Replace the latest state offered to every client. Never blocks on I/O.
  void broadcast(std::string line) {
    {
      std::lock_guard lock(mutex_);
      latest_ = std::move(line);
      ++generation_;
    }
    wake();
  }

  void reply(std::uint64_t client, std::string line) {
    {
      std::lock_guard lock(mutex_);
      replies_.emplace_back(client, std::move(line));
    }
    wake();
  }

  std::vector<BridgeCommand> drain_commands() {
    std::lock_guard lock(mutex_);
    std::vector<BridgeCommand> out(commands_.begin(), commands_.end());
    commands_.clear();
    return out;
  }

 private:
  struct Client {
    net::Fd fd;
    std::string inbuf;
    std::string outbuf;
    std::deque<std::string> replies;
    std::optional<std::string> pending_state;
    std::uint64_t seen_generation{0};
  };

  void wake() {
    const char b = 1;
    [[maybe_unused]] auto n = ::write(wake_write_.get(), &b, 1);
  }

  void loop() {
    while (running_) {
      std::vector<pollfd> fds;
      std::vector<std::uint64_t> ids;
      fds.push_back({listen_.get(), POLLIN, 0});
      fds.push_back({wake_read_.get(), POLLIN, 0});
      for (auto& [id, c] : clients_) {
        short ev = POLLIN;
        if (!c.outbuf.empty() || !c.replies.empty() || c.pending_state) ev |= POLLOUT;
        fds.push_back({c.fd.get(), ev, 0});
        ids.push_back(id);
      }
      if (::poll(fds.data(), fds.size(), 100) < 0 && errno != EINTR) break;

      if (fds[1].revents & POLLIN) {
        char buf[256];
        while (::read(wake_read_.get(), buf, sizeof(buf)) > 0) {
        }
      }
      pull_shared();

      std::vector<std::uint64_t> closed;
      for (std::size_t k = 0; k < ids.size(); ++k) {
        auto it = clients_.find(ids[k]);
        if (it == clients_.end()) continue;
        const auto rev = fds[k + 2].revents;
        if (rev & (POLLERR | POLLHUP | POLLNVAL)) {
          if (!(rev & POLLIN) || !read_client(ids[k], it->second)) {
            closed.push_back(ids[k]);
            continue;
          }
        } else if ((rev & POLLIN) && !read_client(ids[k], it->second)) {
          closed.push_back(ids[k]);
          continue;
        }
        if (!write_client(it->second)) closed.push_back(ids[k]);
      }
      for (auto id : closed) clients_.erase(id);

      if (fds[0].revents & POLLIN) accept_clients();
      {
        std::lock_guard lock(mutex_);
        client_count_ = clients_.size();
      }
    }
  }

  void pull_shared() {
    std::lock_guard lock(mutex_);
    for (auto& [id, c] : clients_) {
      if (latest_ && c.seen_generation != generation_) {
        c.pending_state = *latest_;
        c.seen_generation = generation_;
      }
    }
    for (auto& [id, line] : replies_) {
      auto it = clients_.find(id);
      if (it != clients_.end()) it->second.replies.push_back(std::move(line));
    }
    replies_.clear();
  }

  void accept_clients() {
    while (true) {
      const int fd = ::accept(listen_.get(), nullptr, nullptr);
      if (fd < 0) break;
      net::Fd owned(fd);
      net::set_nonblocking(fd);
      const int one = 1;
      ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
      Client c;
      c.fd = std::move(owned);
      {
        std::lock_guard lock(mutex_);
        c.seen_generation = generation_;
      }
      clients_.emplace(next_id_++, std::move(c));
    }
  }

  // False when the peer has gone away.
  bool read_client(std::uint64_t id, Client& c) {
    char buf[4096];
    while (true) {
      const auto n = ::recv(c.fd.get(), buf, sizeof(buf), 0);
      if (n == 0) return false;
      if (n < 0) return errno == EAGAIN || errno == EWOULDBLOCK || errno == EINTR;
      c.inbuf.append(buf, static_cast<std::size_t>(n));
      std::size_t nl;
      while ((nl = c.inbuf.find('\n')) != std::string::npos) {
        std::string line = c.inbuf.substr(0, nl);
        c.inbuf.erase(0, nl + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        handle_line(id, c, line);
      }
      if (c.inbuf.size() > kMaxLine) {
        c.inbuf.clear();
        c.replies.push_back(error_message("line-too-long"));
      }
    }
  }

  void handle_line(std::uint64_t id, Client& c, const std::string& line) {
    auto parsed = parse_command(line);
    if (auto* reason = std::get_if<std::string>(&parsed)) {
      c.replies.push_back(error_message(*reason));
      return;
    }
    std::lock_guard lock(mutex_);
    commands_.push_back({id, std::get<0>(std::move(parsed))});
  }

  // False on a hard write error.
  bool write_client(Client& c) {
    while (true) {
      if (c.outbuf.empty()) {
        if (!c.replies.empty()) {
          c.outbuf = std::move(c.replies.front()) + "\n";
          c.replies.pop_front();
        } else if (c.pending_state) {
          c.outbuf = std::move(*c.pending_state) + "\n";
          c.pending_state.reset();
        } else {
          return true;
        }
      }
      const auto n = ::send(c.fd.get(), c.outbuf.data(), c.outbuf.size(), MSG_NOSIGNAL);
      if (n < 0) return errno == EAGAIN || errno == EWOULDBLOCK || errno == EINTR;
      c.outbuf.erase(0, static_cast<std::size_t>(n));
      if (!c.outbuf.empty()) return true;
    }
  }

  net::Fd listen_;
  net::Fd wake_read_;
  net::Fd wake_write_;
  std::uint16_t port_{0};
  std::atomic<bool> running_{false};
  std::thread thread_;

  // Owned by the bridge thread.
  std::map<std::uint64_t, Client> clients_;
  std::uint64_t next_id_{1};

  mutable std::mutex mutex_;
  std::optional<std::string> latest_;
  std::uint64_t generation_{0};
  std::deque<std::pair<std::uint64_t, std::string>> replies_;
  std::deque<BridgeCommand> commands_;
  std::size_t client_count_{0};
};

}  // namespace teegi
