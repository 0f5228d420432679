#pragma once

// Thin POSIX socket wrappers: UDP sender/receiver and a file-descriptor owner.

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstdint>
#include <cstring>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

namespace teegi::net {

class Fd {
 public:
  Fd() = default;
  explicit Fd(int fd) : fd_(fd) {}
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  Fd(Fd&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Fd& operator=(Fd&& o) noexcept {
    if (this != &o) {
      reset();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  ~Fd() { reset(); }

  int get() const noexcept { return fd_; }
  bool valid() const noexcept { return fd_ >= 0; }
  void reset() noexcept {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

 private:
  int fd_{-1};
};

inline std::system_error sys_error(const std::string& what) {
  return std::system_error(errno, std::generic_category(), what);
}

inline void set_nonblocking(int fd) {
  const int flags = ::fcntl(fd, F_GETFL, 0);
  if (flags < 0 || ::fcntl(fd, F_SETFL, flags | O_NONBLOCK) < 0) throw sys_error("fcntl(O_NONBLOCK)");
}

struct Endpoint {
  std::string host{"127.0.0.1"};
  std::uint16_t port{0};

  std::string str() const { return host + ":" + std::to_string(port); }
};

/// Parse "host:port" (or ":port", meaning all interfaces).
inline Endpoint parse_endpoint(std::string_view s) {
  const auto colon = s.rfind(':');
  if (colon == std::string_view::npos) throw std::invalid_argument("endpoint '" + std::string(s) + "' lacks ':port'");
  Endpoint e;
  e.host = std::string(s.substr(0, colon));
  if (e.host.empty()) e.host = "0.0.0.0";
  const std::string port(s.substr(colon + 1));
  try {
    std::size_t used = 0;
    const long p = std::stol(port, &used);
    if (used != port.size() || p < 0 || p > 65535) throw std::invalid_argument("range");
    e.port = static_cast<std::uint16_t>(p);
  } catch (const std::exception&) {
    throw std::invalid_argument("endpoint '" + std::string(s) + "' has an invalid port");
  }
  return e;
}

inline sockaddr_in resolve_ipv4(const Endpoint& e) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  addrinfo* res = nullptr;
  const int rc = ::getaddrinfo(e.host.c_str(), nullptr, &hints, &res);
  if (rc != 0 || res == nullptr) {
    throw std::runtime_error("cannot resolve host '" + e.host + "': " + ::gai_strerror(rc));
  }
  sockaddr_in addr{};
  std::memcpy(&addr, res->ai_addr, sizeof(addr));
  ::freeaddrinfo(res);
  addr.sin_port = htons(e.port);
  return addr;
}

inline std::uint16_t local_port(int fd) {
  sockaddr_in addr{};
  socklen_t len = sizeof(addr);
  if (::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len) < 0) throw sys_error("getsockname");
  return ntohs(addr.sin_port);
}

/// Fire-and-forget datagrams to one target.
class UdpSender {
 public:
  explicit UdpSender(const Endpoint& target) : target_(resolve_ipv4(target)) {
    fd_ = Fd(::socket(AF_INET, SOCK_DGRAM, 0));
    if (!fd_.valid()) throw sys_error("socket(udp)");
    set_nonblocking(fd_.get());
  }

  /// Returns false when the datagram could not be queued.
  bool send(std::span<const std::uint8_t> bytes) noexcept {
    const auto n = ::sendto(fd_.get(), bytes.data(), bytes.size(), 0, reinterpret_cast<const sockaddr*>(&target_),
                            sizeof(target_));
    return n == static_cast<ssize_t>(bytes.size());
  }

 private:
  sockaddr_in target_;
  Fd fd_;
};

class UdpReceiver {
 public:
  explicit UdpReceiver(const Endpoint& bind_to) {
    fd_ = Fd(::socket(AF_INET, SOCK_DGRAM, 0));
    if (!fd_.valid()) throw sys_error("socket(udp)");
    const int one = 1;
    ::setsockopt(fd_.get(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    const int rcvbuf = 1 << 20;
    ::setsockopt(fd_.get(), SOL_SOCKET, SO_RCVBUF, &rcvbuf, sizeof(rcvbuf));
    const auto addr = resolve_ipv4(bind_to);
    if (::bind(fd_.get(), reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) < 0) {
      throw sys_error("bind " + bind_to.str());
    }
  }

  std::uint16_t port() const { return local_port(fd_.get()); }

  /// Waits up to `timeout` for one datagram.
  std::optional<std::vector<std::uint8_t>> receive(std::chrono::milliseconds timeout) {
    pollfd p{fd_.get(), POLLIN, 0};
    const int rc = ::poll(&p, 1, static_cast<int>(timeout.count()));
    if (rc <= 0 || !(p.revents & POLLIN)) return std::nullopt;
    std::vector<std::uint8_t> buf(65536);
    const auto n = ::recv(fd_.get(), buf.data(), buf.size(), 0);
    if (n < 0) return std::nullopt;
    buf.resize(static_cast<std::size_t>(n));
    return buf;
  }

 private:
  Fd fd_;
};

}  // namespace teegi::net
