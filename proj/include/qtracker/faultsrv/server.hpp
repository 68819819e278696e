#pragma once

#include <atomic>
#include <chrono>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "qtracker/protection/keys.hpp"
#include "qtracker/traces/trace.hpp"
#include "qtracker/wire/transport_parameters.hpp"

namespace qtracker::faultsrv {

enum class Fault : std::uint8_t {
  none,
  vn_silent,
  vn_echo_reserved,
  stall_after_sh,
  bad_1rtt_protection,
  tp_duplicate,
  no_amplification_limit,
  ignore_stream_limit,
  empty_stream_frames,
  stream_blocked_spam,
  reorder_livelock,
  ack_gap_overflow,
  no_ticket,
  reject_0rtt,
};

std::string_view to_string(Fault f);
std::optional<Fault> fault_from_string(std::string_view s);
/// Every fault except `none`.
const std::vector<Fault>& all_faults();
/// One-line description of the deviation a fault introduces.
std::string_view describe(Fault f);

/// Deterministic HTML body of exactly `size` bytes.
wire::Bytes make_body(std::size_t size);

struct ServerConfig {
  std::string listen = "127.0.0.1:0";
  std::map<std::string, wire::Bytes> resources = {{"/index.html", make_body(160)}};
  wire::TransportParameters parameters = default_server_parameters();
  std::uint64_t seed = 0;
  Fault fault = Fault::none;
  /// Number of STREAM_DATA_BLOCKED frames sent by `stream_blocked_spam`.
  std::size_t blocked_spam_count = 25;
  /// Datagrams sent before address validation by `no_amplification_limit`.
  std::size_t amplification_burst = 16;

  static wire::TransportParameters default_server_parameters();
};

/// A small version 1 responder. Runs its own event loop on a background
/// thread; one connection at a time is the expected load, though several are
/// tracked.
class Server {
 public:
  /// Binds the socket; throws std::runtime_error if that fails.
  explicit Server(ServerConfig config);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  void start();
  /// Interrupts the loop and joins the thread. Idempotent.
  void stop();

  std::uint16_t port() const { return port_; }
  std::string address() const;
  const ServerConfig& config() const { return config_; }

  /// Cleartext copy of every packet the server sent.
  std::vector<traces::PacketRecord> sent_log() const;
  std::size_t connections_accepted() const { return accepted_.load(); }

  struct Connection;

 private:
  void loop();
  void on_datagram(const wire::Bytes& data, const void* addr, unsigned addr_len);
  void on_timers();
  void transmit(const Connection& c, const wire::Bytes& datagram,
                std::optional<protection::EncryptionLevel> level, wire::Bytes cleartext);
  void transmit_raw(const wire::Bytes& datagram, const void* addr, unsigned addr_len,
                    std::optional<protection::EncryptionLevel> level, wire::Bytes cleartext,
                    std::optional<std::size_t> dcid_len);

  ServerConfig config_;
  int fd_ = -1;
  int wake_fd_ = -1;
  std::uint16_t port_ = 0;
  std::thread thread_;
  std::atomic<bool> running_{false};
  std::atomic<std::size_t> accepted_{0};

  mutable std::mutex log_mu_;
  std::vector<traces::PacketRecord> log_;

  std::vector<std::unique_ptr<Connection>> conns_;
  std::map<wire::Bytes, Connection*> routes_;
  std::chrono::steady_clock::time_point epoch_;

  std::uint64_t next_cid_seed_ = 0;
};

}  // namespace qtracker::faultsrv
