#pragma once

#include <condition_variable>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>

#include "qtracker/conn/events.hpp"

namespace qtracker::conn {

/// Resolution or socket setup failed; scenarios report it as a prerequisite
/// error.
class PrerequisiteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Transport {
 public:
  virtual ~Transport() = default;
  virtual void send(wire::ByteSpan datagram) = 0;
  /// Waits until a datagram arrives or `deadline` passes.
  virtual std::optional<Bytes> receive(TimePoint deadline) = 0;
  /// True once the network reported the peer unreachable.
  virtual bool unreachable() const { return false; }
  virtual std::string peer_address() const = 0;
};

struct Endpoint {
  std::string host;
  std::uint16_t port = 0;

  /// Parses "host:port" or "[v6]:port". Port 0 is only accepted for a
  /// listening address.
  static Endpoint parse(const std::string& text, bool allow_any_port = false);
  std::string to_string() const;
};

/// Connected UDP socket (IPv4 or IPv6), so ICMP errors surface as
/// ECONNREFUSED on the next receive.
class UdpTransport final : public Transport {
 public:
  explicit UdpTransport(const Endpoint& peer);
  ~UdpTransport() override;
  UdpTransport(const UdpTransport&) = delete;
  UdpTransport& operator=(const UdpTransport&) = delete;

  void send(wire::ByteSpan datagram) override;
  std::optional<Bytes> receive(TimePoint deadline) override;
  bool unreachable() const override { return unreachable_; }
  std::string peer_address() const override { return address_; }

 private:
  int fd_ = -1;
  bool unreachable_ = false;
  std::string address_;
};

/// In-process datagram pipe. Each side sees the other's sends.
class MemoryChannel {
 public:
  void push(int to_side, Bytes datagram);
  std::optional<Bytes> pop(int side, TimePoint deadline);
  std::size_t pending(int side);

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Bytes> queues_[2];
};

class MemoryTransport final : public Transport {
 public:
  MemoryTransport(std::shared_ptr<MemoryChannel> channel, int side)
      : channel_(std::move(channel)), side_(side) {}

  void send(wire::ByteSpan datagram) override {
    channel_->push(1 - side_, Bytes(datagram.begin(), datagram.end()));
  }
  std::optional<Bytes> receive(TimePoint deadline) override {
    return channel_->pop(side_, deadline);
  }
  std::string peer_address() const override { return "memory"; }

 private:
  std::shared_ptr<MemoryChannel> channel_;
  int side_;
};

}  // namespace qtracker::conn
