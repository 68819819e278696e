#pragma once

#include <array>
#include <bitset>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>

#include "qtracker/conn/events.hpp"
#include "qtracker/conn/stream.hpp"
#include "qtracker/conn/transport.hpp"
#include "qtracker/protection/handshake_provider.hpp"
#include "qtracker/traces/trace.hpp"
#include "qtracker/wire/transport_parameters.hpp"

namespace qtracker::conn {

using namespace std::chrono_literals;

enum class AgentId : std::uint8_t {
  socket,
  parser,
  tls,
  ack,
  flow_control,
  handshake,
  retransmission,
  bundler,
  closing,
};
inline constexpr std::size_t kAgentCount = 9;

/// Fixed dispatch order, so traces are reproducible.
inline constexpr std::array<AgentId, kAgentCount> kDispatchOrder = {
    AgentId::parser,    AgentId::tls,     AgentId::ack,
    AgentId::flow_control, AgentId::handshake, AgentId::retransmission,
    AgentId::bundler,   AgentId::closing, AgentId::socket};

std::string_view to_string(AgentId id);
std::optional<AgentId> agent_from_string(std::string_view s);

class AgentRoster {
 public:
  static AgentRoster all() { return AgentRoster(std::bitset<kAgentCount>().set()); }
  static AgentRoster none() { return AgentRoster({}); }
  static AgentRoster of(std::initializer_list<AgentId> ids);

  AgentRoster with(AgentId id) const;
  AgentRoster without(AgentId id) const;
  bool contains(AgentId id) const { return bits_.test(static_cast<std::size_t>(id)); }
  bool operator==(const AgentRoster&) const = default;

 private:
  explicit AgentRoster(std::bitset<kAgentCount> bits) : bits_(bits) {}
  std::bitset<kAgentCount> bits_;
};

class Connection;

/// A behaviour unit reacting to connection events.
class Agent {
 public:
  virtual ~Agent() = default;
  virtual AgentId id() const = 0;
  virtual bool subscribes(EventKind kind) const = 0;
  virtual Effects handle(Connection& conn, const Event& event) = 0;
};

struct ConnectionConfig {
  std::uint32_t version = wire::kQuicVersion1;
  AgentRoster roster = AgentRoster::all();
  /// Seeds the connection ids so runs are reproducible.
  std::uint64_t cid_seed = 0;
  std::size_t cid_length = 8;
  /// Packet log timestamps are offsets from this instant.
  std::optional<TimePoint> log_epoch;
  /// Do not send our handshake-level CRYPTO data (keeps the server from
  /// validating our address).
  bool withhold_handshake_flight = false;
  Duration retransmission_timeout = 500ms;
  std::size_t max_datagram_size = 1252;
  std::size_t initial_datagram_size = 1200;
  /// Our advertised parameters; the receive-side ledgers start from these.
  wire::TransportParameters local_parameters;
  /// Peer parameters remembered from an earlier connection, used as send
  /// limits for 0-RTT data.
  std::optional<wire::TransportParameters> remembered_peer_parameters;
};

wire::TransportParameters default_client_parameters();

enum class PnSpaceId : std::uint8_t { initial, handshake, application };
PnSpaceId space_of(EncryptionLevel level);

struct PacketNumberSpace {
  std::uint64_t next_pn = 0;
  std::optional<std::uint64_t> largest_acked;
  std::optional<std::uint64_t> largest_received;
  std::set<std::uint64_t> received;
};

struct AgentFailure {
  AgentId agent;
  EventKind event;
  std::string what;
};

struct HandshakeProgress {
  bool started = false;
  bool version_negotiation = false;
  std::vector<std::uint32_t> offered_versions;
  std::optional<std::string> tls_error;
  bool handshake_done_received = false;
};

struct CloseInfo {
  std::uint64_t error_code = 0;
  std::string reason;
  bool by_peer = false;
};

class Connection {
 public:
  Connection(ConnectionConfig config, std::unique_ptr<Transport> transport,
             std::unique_ptr<protection::HandshakeProvider> provider,
             std::vector<traces::PacketRecord>* log = nullptr);
  ~Connection();
  Connection(const Connection&) = delete;
  Connection& operator=(const Connection&) = delete;

  /// Emits ConnectionStarted and processes its consequences. No packet is
  /// sent before this.
  void start();
  bool started() const { return started_; }

  /// Runs one event through every enabled, subscribed agent in dispatch
  /// order, applies their effects and returns them. Emitted events are
  /// appended to the FIFO but not processed.
  Effects dispatch(const Event& event);
  void post(Event event);
  /// Dispatches queued events until the FIFO is empty.
  void pump();
  /// Drives timers and the socket until `done()` holds or `deadline` passes.
  bool run_until(const std::function<bool()>& done, TimePoint deadline);
  void run_for(Duration d);

  /// Observers see every dispatched event before the agents do.
  void add_observer(std::function<void(const Event&)> observer);

  // Application interface.
  /// Queues stream data. Throws std::logic_error if the peer's limits would
  /// be exceeded.
  void send_stream(std::uint64_t stream_id, wire::ByteSpan data, bool fin,
                   EncryptionLevel level = EncryptionLevel::one_rtt);
  void raise_stream_limit(std::uint64_t stream_id, std::uint64_t new_limit);
  void close(std::uint64_t error_code, std::string reason);
  /// Reserves `count` consecutive packet numbers in the level's space.
  std::uint64_t reserve_packet_numbers(EncryptionLevel level, std::size_t count);
  /// Sends one packet with an explicit (possibly reserved) packet number,
  /// bypassing the frame queue.
  void send_packet_with_number(EncryptionLevel level, std::uint64_t pn,
                               std::vector<wire::Frame> frames);

  // State shared with agents.
  const ConnectionConfig& config() const { return config_; }
  const wire::ConnectionId& dcid() const { return dcid_; }
  const wire::ConnectionId& scid() const { return scid_; }
  const wire::ConnectionId& original_dcid() const { return original_dcid_; }
  void set_dcid(wire::ConnectionId dcid) { dcid_ = std::move(dcid); dcid_switched_ = true; }
  bool dcid_switched() const { return dcid_switched_; }

  void install_key(const protection::KeyMaterial& key);
  const protection::KeyMaterial* read_key(EncryptionLevel level) const;
  const protection::KeyMaterial* write_key(EncryptionLevel level) const;

  PacketNumberSpace& space(EncryptionLevel level);
  PacketNumberSpace& space(PnSpaceId id) { return spaces_[static_cast<std::size_t>(id)]; }
  std::deque<wire::Frame>& queue(EncryptionLevel level) {
    return queues_[static_cast<std::size_t>(level)];
  }
  void queue_frame(EncryptionLevel level, wire::Frame frame);

  StreamState& stream(std::uint64_t id);
  const std::map<std::uint64_t, StreamState>& streams() const { return streams_; }
  const StreamState* find_stream(std::uint64_t id) const;
  std::uint64_t connection_send_limit() const { return conn_send_limit_; }
  void raise_connection_send_limit(std::uint64_t limit);
  std::uint64_t connection_bytes_sent() const;

  StreamReassembler& crypto_stream(EncryptionLevel level) {
    return crypto_recv_[static_cast<std::size_t>(level)];
  }
  std::uint64_t& crypto_send_offset(EncryptionLevel level) {
    return crypto_send_[static_cast<std::size_t>(level)];
  }

  protection::HandshakeProvider& provider() { return *provider_; }
  const protection::HandshakeProvider& provider() const { return *provider_; }
  /// Turns provider output into queued CRYPTO frames, honouring
  /// withhold_handshake_flight, and installs any newly exported keys.
  Effects absorb_provider_output(const std::vector<protection::CryptoOutput>& out);
  void set_peer_parameters(const wire::TransportParameters& tp);
  const std::optional<wire::TransportParameters>& peer_parameters() const { return peer_tp_; }

  HandshakeProgress& progress() { return progress_; }
  const HandshakeProgress& progress() const { return progress_; }
  bool handshake_complete() const;

  Transport& transport() { return *transport_; }
  const Transport& transport() const { return *transport_; }
  std::int64_t now_ms() const;
  void log_packet(traces::PacketRecord record);

  /// Builds and protects one packet; the caller emits the PacketSent event.
  PacketSent build_packet(EncryptionLevel level, std::vector<wire::Frame> frames,
                          std::optional<std::uint64_t> pn = std::nullopt);
  /// Bytes of payload that fit in one datagram at `level`.
  std::size_t payload_budget(EncryptionLevel level) const;

  bool closing() const { return closing_; }
  void set_closing() { closing_ = true; }
  bool closed() const { return close_info_.has_value(); }
  const std::optional<CloseInfo>& close_info() const { return close_info_; }
  void mark_closed(CloseInfo info);

  void record_failure(AgentFailure f) { failures_.push_back(std::move(f)); }
  const std::vector<AgentFailure>& agent_failures() const { return failures_; }
  std::vector<DecryptionFailed>& decryption_failures() { return decrypt_failures_; }
  std::vector<std::string>& malformed_packets() { return malformed_; }

  std::uint64_t bytes_sent = 0;
  std::uint64_t bytes_received = 0;
  std::uint64_t datagrams_received = 0;

 private:
  void apply(const Effect& effect, std::set<EncryptionLevel>& dirty);
  void fire_timers();

  ConnectionConfig config_;
  std::unique_ptr<Transport> transport_;
  std::unique_ptr<protection::HandshakeProvider> provider_;
  std::vector<traces::PacketRecord>* log_;
  std::vector<std::unique_ptr<Agent>> agents_;  // in dispatch order
  std::vector<std::function<void(const Event&)>> observers_;
  std::deque<Event> fifo_;
  std::map<std::string, TimePoint> timers_;
  TimePoint epoch_;
  bool started_ = false;

  wire::ConnectionId dcid_;
  wire::ConnectionId scid_;
  wire::ConnectionId original_dcid_;
  bool dcid_switched_ = false;

  std::array<std::optional<protection::KeyMaterial>, protection::kLevelCount> read_keys_;
  std::array<std::optional<protection::KeyMaterial>, protection::kLevelCount> write_keys_;
  std::array<PacketNumberSpace, 3> spaces_;
  std::array<std::deque<wire::Frame>, protection::kLevelCount> queues_;
  std::array<StreamReassembler, protection::kLevelCount> crypto_recv_;
  std::array<std::uint64_t, protection::kLevelCount> crypto_send_{};

  std::map<std::uint64_t, StreamState> streams_;
  std::uint64_t conn_send_limit_ = 0;
  std::optional<wire::TransportParameters> peer_tp_;

  HandshakeProgress progress_;
  bool closing_ = false;
  std::optional<CloseInfo> close_info_;
  std::vector<AgentFailure> failures_;
  std::vector<DecryptionFailed> decrypt_failures_;
  std::vector<std::string> malformed_;
};

/// Constructs the standard agent for `id`.
std::unique_ptr<Agent> make_agent(AgentId id);

}  // namespace qtracker::conn
