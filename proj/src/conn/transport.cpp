#include "qtracker/conn/transport.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

namespace qtracker::conn {

Endpoint Endpoint::parse(const std::string& text, bool allow_any_port) {
  std::string host;
  std::string port;
  if (!text.empty() && text.front() == '[') {
    const auto close = text.find(']');
    if (close == std::string::npos || close + 1 >= text.size() || text[close + 1] != ':') {
      throw std::invalid_argument("bad endpoint: " + text);
    }
    host = text.substr(1, close - 1);
    port = text.substr(close + 2);
  } else {
    const auto colon = text.rfind(':');
    if (colon == std::string::npos) throw std::invalid_argument("endpoint needs a port: " + text);
    host = text.substr(0, colon);
    port = text.substr(colon + 1);
  }
  if (port.empty() || port.find_first_not_of("0123456789") != std::string::npos) {
    throw std::invalid_argument("bad endpoint: " + text);
  }
  const unsigned long p = std::stoul(port);
  if (host.empty() || (p == 0 && !allow_any_port) || p > 65535) throw std::invalid_argument("bad endpoint: " + text);
  return {host, static_cast<std::uint16_t>(p)};
}

std::string Endpoint::to_string() const {
  if (host.find(':') != std::string::npos) return "[" + host + "]:" + std::to_string(port);
  return host + ":" + std::to_string(port);
}

UdpTransport::UdpTransport(const Endpoint& peer) {
  addrinfo hints{};
  hints.ai_socktype = SOCK_DGRAM;
  hints.ai_family = AF_UNSPEC;
  addrinfo* res = nullptr;
  const std::string port = std::to_string(peer.port);
  if (int rc = getaddrinfo(peer.host.c_str(), port.c_str(), &hints, &res); rc != 0) {
    throw PrerequisiteError("cannot resolve " + peer.host + ": " + gai_strerror(rc));
  }
  std::string last_error = "no addresses";
  for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
    const int fd = socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
    if (fd < 0) {
      last_error = std::strerror(errno);
      continue;
    }
    if (connect(fd, ai->ai_addr, ai->ai_addrlen) != 0) {
      last_error = std::strerror(errno);
      close(fd);
      continue;
    }
    char buf[INET6_ADDRSTRLEN] = {};
    const void* addr = ai->ai_family == AF_INET
                           ? static_cast<const void*>(&reinterpret_cast<sockaddr_in*>(ai->ai_addr)->sin_addr)
                           : static_cast<const void*>(&reinterpret_cast<sockaddr_in6*>(ai->ai_addr)->sin6_addr);
    inet_ntop(ai->ai_family, addr, buf, sizeof buf);
    address_ = buf;
    fd_ = fd;
    break;
  }
  freeaddrinfo(res);
  if (fd_ < 0) throw PrerequisiteError("cannot open socket to " + peer.to_string() + ": " + last_error);
}

UdpTransport::~UdpTransport() {
  if (fd_ >= 0) close(fd_);
}

void UdpTransport::send(wire::ByteSpan datagram) {
  if (::send(fd_, datagram.data(), datagram.size(), 0) < 0) {
    if (errno == ECONNREFUSED || errno == EHOSTUNREACH || errno == ENETUNREACH) {
      unreachable_ = true;
    }
  }
}

std::optional<Bytes> UdpTransport::receive(TimePoint deadline) {
  for (;;) {
    const auto now = Clock::now();
    const auto wait_ms = deadline <= now ? 0
                         : std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count() + 1;
    pollfd pfd{fd_, POLLIN, 0};
    const int rc = poll(&pfd, 1, static_cast<int>(wait_ms));
    if (rc < 0 && errno == EINTR) continue;
    if (rc <= 0) return std::nullopt;
    Bytes buf(65536);
    const ssize_t n = recv(fd_, buf.data(), buf.size(), 0);
    if (n < 0) {
      if (errno == ECONNREFUSED || errno == EHOSTUNREACH || errno == ENETUNREACH) {
        unreachable_ = true;
        return std::nullopt;
      }
      if (errno == EINTR || errno == EAGAIN) continue;
      return std::nullopt;
    }
    buf.resize(static_cast<std::size_t>(n));
    return buf;
  }
}

void MemoryChannel::push(int to_side, Bytes datagram) {
  {
    std::lock_guard lock(mu_);
    queues_[to_side].push_back(std::move(datagram));
  }
  cv_.notify_all();
}

std::optional<Bytes> MemoryChannel::pop(int side, TimePoint deadline) {
  std::unique_lock lock(mu_);
  if (!cv_.wait_until(lock, deadline, [&] { return !queues_[side].empty(); })) {
    return std::nullopt;
  }
  Bytes d = std::move(queues_[side].front());
  queues_[side].pop_front();
  return d;
}

std::size_t MemoryChannel::pending(int side) {
  std::lock_guard lock(mu_);
  return queues_[side].size();
}

}  // namespace qtracker::conn
