#include "qtracker/conn/connection.hpp"

#include <algorithm>
#include <random>

#include "qtracker/protection/packet_protection.hpp"
#include "qtracker/wire/varint.hpp"

namespace qtracker::conn {

namespace {

constexpr std::array<std::string_view, kAgentCount> kAgentNames = {
    "socket",    "parser",         "tls",     "ack",    "flow_control",
    "handshake", "retransmission", "bundler", "closing"};

constexpr std::array<std::string_view, kEventKindCount> kEventNames = {
    "connection_started", "datagram_received", "packet_received",  "packet_sent",
    "new_keys_available", "frames_queued",     "stream_data_readable", "loss_detected",
    "connection_closed",  "timeout",           "decryption_failed", "flow_control_raise",
    "close_requested"};

wire::ConnectionId random_cid(std::mt19937_64& rng, std::size_t length) {
  Bytes b(length);
  for (auto& x : b) x = static_cast<std::uint8_t>(rng());
  return wire::ConnectionId(b);
}

bool is_client_initiated(std::uint64_t stream_id) { return (stream_id & 0x1) == 0; }
bool is_bidirectional(std::uint64_t stream_id) { return (stream_id & 0x2) == 0; }

/// Limit the given side applies to a stream, from that side's parameters.
/// `local` selects our view (streams we opened use the *_local parameter of
/// our own set, the *_remote parameter of the peer's set).
std::uint64_t stream_limit(const wire::TransportParameters& tp, std::uint64_t stream_id,
                           bool opened_by_owner) {
  if (!is_bidirectional(stream_id)) {
    return tp.integer(wire::tp_id::kInitialMaxStreamDataUni).value_or(0);
  }
  return (opened_by_owner ? tp.initial_max_stream_data_bidi_local()
                          : tp.initial_max_stream_data_bidi_remote())
      .value_or(0);
}

}  // namespace

std::string_view to_string(AgentId id) { return kAgentNames[static_cast<std::size_t>(id)]; }

std::optional<AgentId> agent_from_string(std::string_view s) {
  for (std::size_t i = 0; i < kAgentCount; ++i) {
    if (kAgentNames[i] == s) return static_cast<AgentId>(i);
  }
  return std::nullopt;
}

std::string_view to_string(EventKind k) { return kEventNames[static_cast<std::size_t>(k)]; }

AgentRoster AgentRoster::of(std::initializer_list<AgentId> ids) {
  std::bitset<kAgentCount> bits;
  for (auto id : ids) bits.set(static_cast<std::size_t>(id));
  return AgentRoster(bits);
}

AgentRoster AgentRoster::with(AgentId id) const {
  auto b = bits_;
  b.set(static_cast<std::size_t>(id));
  return AgentRoster(b);
}

AgentRoster AgentRoster::without(AgentId id) const {
  auto b = bits_;
  b.reset(static_cast<std::size_t>(id));
  return AgentRoster(b);
}

wire::TransportParameters default_client_parameters() {
  wire::TransportParameters tp;
  tp.set_max_idle_timeout(30000);
  tp.set_initial_max_data(1 << 20);
  tp.set_initial_max_stream_data_bidi_local(64 * 1024);
  tp.set_initial_max_stream_data_bidi_remote(64 * 1024);
  tp.set_integer(wire::tp_id::kInitialMaxStreamDataUni, 64 * 1024);
  tp.set_initial_max_streams_bidi(100);
  tp.set_integer(wire::tp_id::kInitialMaxStreamsUni, 100);
  return tp;
}

PnSpaceId space_of(EncryptionLevel level) {
  switch (level) {
    case EncryptionLevel::initial: return PnSpaceId::initial;
    case EncryptionLevel::handshake: return PnSpaceId::handshake;
    default: return PnSpaceId::application;
  }
}

Connection::Connection(ConnectionConfig config, std::unique_ptr<Transport> transport,
                       std::unique_ptr<protection::HandshakeProvider> provider,
                       std::vector<traces::PacketRecord>* log)
    : config_(std::move(config)),
      transport_(std::move(transport)),
      provider_(std::move(provider)),
      log_(log),
      epoch_(config_.log_epoch.value_or(Clock::now())) {
  std::mt19937_64 rng(config_.cid_seed);
  dcid_ = random_cid(rng, config_.cid_length);
  scid_ = random_cid(rng, config_.cid_length);
  original_dcid_ = dcid_;
  // Unknown versions still need some Initial protection; the version 1 salt
  // is used so the packet is well formed even if the peer cannot read it.
  const auto [client, server] = protection::derive_initial_keys(dcid_, wire::kQuicVersion1);
  install_key(client);
  install_key(server);
  if (config_.remembered_peer_parameters) {
    conn_send_limit_ = config_.remembered_peer_parameters->initial_max_data().value_or(0);
  }
  for (auto id : kDispatchOrder) {
    if (config_.roster.contains(id)) agents_.push_back(make_agent(id));
  }
}

Connection::~Connection() = default;

void Connection::start() {
  if (started_) return;
  started_ = true;
  post(ConnectionStarted{});
  pump();
}

void Connection::add_observer(std::function<void(const Event&)> observer) {
  observers_.push_back(std::move(observer));
}

Effects Connection::dispatch(const Event& event) {
  for (const auto& o : observers_) o(event);
  Effects all;
  std::set<EncryptionLevel> dirty;
  const EventKind kind = kind_of(event);
  for (auto& agent : agents_) {
    if (!agent->subscribes(kind)) continue;
    Effects fx;
    try {
      fx = agent->handle(*this, event);
    } catch (const std::exception& e) {
      record_failure({agent->id(), kind, e.what()});
      continue;
    }
    for (const auto& f : fx) apply(f, dirty);
    all.insert(all.end(), std::make_move_iterator(fx.begin()), std::make_move_iterator(fx.end()));
  }
  for (auto level : dirty) fifo_.push_back(FramesQueued{level});
  return all;
}

void Connection::apply(const Effect& effect, std::set<EncryptionLevel>& dirty) {
  std::visit(
      [&](const auto& e) {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, EmitEvent>) {
          fifo_.push_back(e.event);
        } else if constexpr (std::is_same_v<T, QueueFrame>) {
          queue_frame(e.level, e.frame);
          dirty.insert(e.level);
        } else if constexpr (std::is_same_v<T, ArmTimer>) {
          timers_[e.timer_id] = Clock::now() + e.after;
        } else if constexpr (std::is_same_v<T, CancelTimer>) {
          timers_.erase(e.timer_id);
        } else if constexpr (std::is_same_v<T, SendPacket>) {
          dirty.insert(e.level);
        } else if constexpr (std::is_same_v<T, CloseConnection>) {
          fifo_.push_back(CloseRequested{e.error_code, e.reason, e.application});
        }
      },
      effect);
}

void Connection::post(Event event) { fifo_.push_back(std::move(event)); }

void Connection::pump() {
  while (!fifo_.empty()) {
    Event ev = std::move(fifo_.front());
    fifo_.pop_front();
    dispatch(ev);
  }
}

void Connection::fire_timers() {
  const auto now = Clock::now();
  std::vector<std::string> expired;
  for (const auto& [id, when] : timers_) {
    if (when <= now) expired.push_back(id);
  }
  for (const auto& id : expired) {
    timers_.erase(id);
    post(Timeout{id});
  }
  pump();
}

bool Connection::run_until(const std::function<bool()>& done, TimePoint deadline) {
  pump();
  for (;;) {
    if (done()) return true;
    const auto now = Clock::now();
    if (now >= deadline) return false;
    fire_timers();
    if (done()) return true;
    TimePoint wake = deadline;
    for (const auto& [id, when] : timers_) wake = std::min(wake, when);
    if (auto d = transport_->receive(wake)) {
      post(DatagramReceived{std::move(*d), Clock::now()});
      pump();
    }
  }
}

void Connection::run_for(Duration d) {
  run_until([] { return false; }, Clock::now() + d);
}

void Connection::send_stream(std::uint64_t stream_id, wire::ByteSpan data, bool fin,
                             EncryptionLevel level) {
  auto& s = stream(stream_id);
  const std::uint64_t end = s.send_offset + data.size();
  if (end > s.send_limit) {
    throw std::logic_error("stream " + std::to_string(stream_id) + " send limit " +
                           std::to_string(s.send_limit) + " exceeded");
  }
  if (connection_bytes_sent() + data.size() > conn_send_limit_) {
    throw std::logic_error("connection send limit exceeded");
  }
  queue_frame(level, wire::StreamFrame{stream_id, s.send_offset, Bytes(data.begin(), data.end()), fin});
  s.send_offset = end;
  s.fin_sent = s.fin_sent || fin;
  post(FramesQueued{level});
}

void Connection::raise_stream_limit(std::uint64_t stream_id, std::uint64_t new_limit) {
  post(FlowControlRaise{stream_id, new_limit});
}

void Connection::close(std::uint64_t error_code, std::string reason) {
  post(CloseRequested{error_code, std::move(reason), true});
}

std::uint64_t Connection::reserve_packet_numbers(EncryptionLevel level, std::size_t count) {
  auto& sp = space(level);
  const std::uint64_t first = sp.next_pn;
  sp.next_pn += count;
  return first;
}

void Connection::send_packet_with_number(EncryptionLevel level, std::uint64_t pn,
                                         std::vector<wire::Frame> frames) {
  post(build_packet(level, std::move(frames), pn));
  pump();
}

void Connection::install_key(const protection::KeyMaterial& key) {
  // The client writes with client keys and reads with server keys.
  auto& slot = key.direction == protection::Direction::client ? write_keys_ : read_keys_;
  slot[static_cast<std::size_t>(key.level)] = key;
}

const protection::KeyMaterial* Connection::read_key(EncryptionLevel level) const {
  const auto& k = read_keys_[static_cast<std::size_t>(level)];
  return k ? &*k : nullptr;
}

const protection::KeyMaterial* Connection::write_key(EncryptionLevel level) const {
  const auto& k = write_keys_[static_cast<std::size_t>(level)];
  return k ? &*k : nullptr;
}

PacketNumberSpace& Connection::space(EncryptionLevel level) { return space(space_of(level)); }

void Connection::queue_frame(EncryptionLevel level, wire::Frame frame) {
  auto& q = queue(level);
  if (std::holds_alternative<wire::AckFrame>(frame)) {
    std::erase_if(q, [](const wire::Frame& f) { return std::holds_alternative<wire::AckFrame>(f); });
    // ACKs go first so a split queue still acknowledges promptly.
    q.push_front(std::move(frame));
    return;
  }
  q.push_back(std::move(frame));
}

StreamState& Connection::stream(std::uint64_t id) {
  auto [it, inserted] = streams_.try_emplace(id);
  if (inserted) {
    const bool ours = is_client_initiated(id);
    it->second.recv_limit = stream_limit(config_.local_parameters, id, ours);
    const auto& peer = peer_tp_ ? peer_tp_ : config_.remembered_peer_parameters;
    if (peer) it->second.send_limit = stream_limit(*peer, id, !ours);
  }
  return it->second;
}

const StreamState* Connection::find_stream(std::uint64_t id) const {
  auto it = streams_.find(id);
  return it == streams_.end() ? nullptr : &it->second;
}

void Connection::raise_connection_send_limit(std::uint64_t limit) {
  conn_send_limit_ = std::max(conn_send_limit_, limit);
}

std::uint64_t Connection::connection_bytes_sent() const {
  std::uint64_t total = 0;
  for (const auto& [id, s] : streams_) total += s.send_offset;
  return total;
}

void Connection::set_peer_parameters(const wire::TransportParameters& tp) {
  peer_tp_ = tp;
  raise_connection_send_limit(tp.initial_max_data().value_or(0));
  for (auto& [id, s] : streams_) {
    s.send_limit = std::max(s.send_limit, stream_limit(tp, id, !is_client_initiated(id)));
  }
}

Effects Connection::absorb_provider_output(const std::vector<protection::CryptoOutput>& out) {
  Effects fx;
  for (const auto& o : out) {
    if (o.level == EncryptionLevel::handshake && config_.withhold_handshake_flight) continue;
    auto& offset = crypto_send_offset(o.level);
    fx.push_back(QueueFrame{o.level, wire::CryptoFrame{offset, o.data}});
    offset += o.data.size();
  }
  std::set<EncryptionLevel> fresh;
  for (const auto& key : provider_->exported_secrets()) {
    const bool had = read_key(key.level) || write_key(key.level);
    install_key(key);
    if (!had) fresh.insert(key.level);
  }
  for (auto level : fresh) fx.push_back(EmitEvent{NewKeysAvailable{level}});
  if (!peer_tp_) {
    if (auto tp = provider_->peer_transport_parameters()) set_peer_parameters(*tp);
  }
  return fx;
}

bool Connection::handshake_complete() const {
  return provider_->handshake_complete() && read_key(EncryptionLevel::one_rtt) &&
         write_key(EncryptionLevel::one_rtt);
}

std::int64_t Connection::now_ms() const {
  return std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - epoch_).count();
}

void Connection::log_packet(traces::PacketRecord record) {
  if (log_) log_->push_back(std::move(record));
}

std::size_t Connection::payload_budget(EncryptionLevel level) const {
  std::size_t header = 0;
  if (level == EncryptionLevel::one_rtt) {
    header = 1 + dcid_.size() + 4;
  } else {
    header = 1 + 4 + 1 + dcid_.size() + 1 + scid_.size() + 4 + 4;
    if (level == EncryptionLevel::initial) header += 1;
  }
  return config_.max_datagram_size - header - protection::kAeadOverhead;
}

PacketSent Connection::build_packet(EncryptionLevel level, std::vector<wire::Frame> frames,
                                    std::optional<std::uint64_t> pn) {
  const auto* key = write_key(level);
  if (!key) {
    throw std::logic_error("no write key at level " + std::string(protection::to_string(level)));
  }
  auto& sp = space(level);
  const std::uint64_t number = pn.value_or(sp.next_pn);
  sp.next_pn = std::max(sp.next_pn, number + 1);

  wire::PacketHeader h;
  h.type = protection::packet_type_of(level);
  h.version = config_.version;
  h.dcid = dcid_;
  if (h.is_long()) h.scid = scid_;
  h.packet_number = number;
  h.pn_length = wire::packet_number_length(number, sp.largest_acked);

  auto append_padding = [&frames](std::size_t n) {
    if (n == 0) return;
    if (!frames.empty()) {
      if (auto* p = std::get_if<wire::PaddingFrame>(&frames.back())) {
        p->length += n;
        return;
      }
    }
    frames.push_back(wire::PaddingFrame{n});
  };

  Bytes payload = wire::serialize_frames(frames);
  std::size_t target = 4 - std::min<std::size_t>(4, h.pn_length);  // sampling minimum
  if (level == EncryptionLevel::initial) {
    const std::size_t header_size = wire::serialize_header(h).size();
    const std::size_t overhead = header_size + protection::kAeadOverhead;
    if (config_.initial_datagram_size > overhead) {
      target = std::max(target, config_.initial_datagram_size - overhead);
    }
  }
  if (payload.size() < target) {
    append_padding(target - payload.size());
    payload.resize(target, 0);
  }

  auto protected_packet = protection::protect_packet(h, wire::as_span(payload), *key);
  if (h.is_long()) h.length = h.pn_length + payload.size() + protection::kAeadOverhead;

  PacketSent ev;
  ev.header = h;
  ev.frames = std::move(frames);
  ev.level = level;
  ev.timestamp = Clock::now();
  ev.cleartext = protected_packet.cleartext();
  ev.datagram = std::move(protected_packet.datagram);
  return ev;
}

void Connection::mark_closed(CloseInfo info) {
  if (!close_info_) close_info_ = std::move(info);
}

}  // namespace qtracker::conn
