#include "qtracker/faultsrv/server.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <poll.h>
#include <sys/eventfd.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <cstring>
#include <deque>
#include <random>
#include <set>
#include <stdexcept>

#include "qtracker/conn/stream.hpp"
#include "qtracker/conn/transport.hpp"
#include "qtracker/protection/handshake_provider.hpp"
#include "qtracker/protection/packet_protection.hpp"
#include "qtracker/wire/frames.hpp"
#include "qtracker/wire/varint.hpp"

namespace qtracker::faultsrv {

using namespace std::chrono_literals;
using protection::EncryptionLevel;
using wire::Bytes;
using wire::ByteSpan;
using wire::Frame;
using Clock = std::chrono::steady_clock;

namespace {

constexpr std::size_t kMaxDatagram = 1252;
constexpr std::size_t kMinClientInitial = 1200;
constexpr std::size_t kCidLength = 8;
constexpr std::size_t kStreamChunk = 1000;
constexpr std::uint64_t kAmplificationFactor = 3;
constexpr auto kPtoBase = 100ms;
constexpr int kPtoMaxShift = 4;
constexpr auto kIdleTimeout = 15s;

struct FaultInfo {
  Fault fault;
  std::string_view name;
  std::string_view description;
};

constexpr std::array<FaultInfo, 14> kFaults{{
    {Fault::none, "none", "conformant behavior"},
    {Fault::vn_silent, "vn_silent", "drops Initials carrying an unknown version"},
    {Fault::vn_echo_reserved, "vn_echo_reserved",
     "lists the client's reserved version in Version Negotiation"},
    {Fault::stall_after_sh, "stall_after_sh", "sends ServerHello, then no further CRYPTO data"},
    {Fault::bad_1rtt_protection, "bad_1rtt_protection",
     "corrupts the AEAD tag of the first 1-RTT packet"},
    {Fault::tp_duplicate, "tp_duplicate", "advertises initial_max_data twice"},
    {Fault::no_amplification_limit, "no_amplification_limit",
     "sends about 20 kB before the client address is validated"},
    {Fault::ignore_stream_limit, "ignore_stream_limit",
     "sends the whole body regardless of the stream data limit"},
    {Fault::empty_stream_frames, "empty_stream_frames",
     "adds a zero-length non-fin STREAM frame when blocked"},
    {Fault::stream_blocked_spam, "stream_blocked_spam",
     "repeats STREAM_DATA_BLOCKED and retransmits data already sent"},
    {Fault::reorder_livelock, "reorder_livelock",
     "never answers a stream whose first frame does not start at offset 0"},
    {Fault::ack_gap_overflow, "ack_gap_overflow",
     "acknowledges a reordered packet with a gap of 2^62-1"},
    {Fault::no_ticket, "no_ticket", "never sends NewSessionTicket"},
    {Fault::reject_0rtt, "reject_0rtt", "refuses early data and discards 0-RTT packets"},
}};

enum Space : std::size_t { kInitialSpace, kHandshakeSpace, kAppSpace };

Space space_of(EncryptionLevel level) {
  switch (level) {
    case EncryptionLevel::initial: return kInitialSpace;
    case EncryptionLevel::handshake: return kHandshakeSpace;
    default: return kAppSpace;
  }
}

std::size_t index_of(EncryptionLevel level) { return static_cast<std::size_t>(level); }

bool retransmittable(const Frame& f) {
  return !std::holds_alternative<wire::AckFrame>(f) &&
         !std::holds_alternative<wire::PaddingFrame>(f) &&
         !std::holds_alternative<wire::PingFrame>(f);
}

struct LongPrefix {
  std::uint32_t version = 0;
  wire::ConnectionId dcid;
  wire::ConnectionId scid;
};

// Version-independent long header fields.
std::optional<LongPrefix> read_long_prefix(ByteSpan data) {
  try {
    wire::ByteReader r(data);
    r.read_u8();
    LongPrefix p;
    p.version = r.read_u32();
    p.dcid = wire::ConnectionId(r.read_span(r.read_u8()));
    p.scid = wire::ConnectionId(r.read_span(r.read_u8()));
    return p;
  } catch (const wire::ParseError&) {
    return std::nullopt;
  }
}

}  // namespace

std::string_view to_string(Fault f) { return kFaults[static_cast<std::size_t>(f)].name; }

std::optional<Fault> fault_from_string(std::string_view s) {
  for (const auto& info : kFaults) {
    if (info.name == s) return info.fault;
  }
  return std::nullopt;
}

const std::vector<Fault>& all_faults() {
  static const std::vector<Fault> faults = [] {
    std::vector<Fault> v;
    for (const auto& info : kFaults) {
      if (info.fault != Fault::none) v.push_back(info.fault);
    }
    return v;
  }();
  return faults;
}

std::string_view describe(Fault f) { return kFaults[static_cast<std::size_t>(f)].description; }

Bytes make_body(std::size_t size) {
  static constexpr std::string_view kHead = "<!DOCTYPE html><html><body><p>";
  static constexpr std::string_view kTail = "</p></body></html>\n";
  std::string body;
  if (size >= kHead.size() + kTail.size()) {
    body.append(kHead);
    for (std::size_t i = 0; body.size() + kTail.size() < size; ++i) {
      body.push_back(static_cast<char>('a' + i % 26));
    }
    body.append(kTail);
  } else {
    for (std::size_t i = 0; i < size; ++i) body.push_back(static_cast<char>('a' + i % 26));
  }
  return wire::to_bytes(body);
}

wire::TransportParameters ServerConfig::default_server_parameters() {
  wire::TransportParameters tp;
  tp.set_max_idle_timeout(30000);
  tp.set_initial_max_data(1 << 20);
  tp.set_initial_max_stream_data_bidi_local(1 << 16);
  tp.set_initial_max_stream_data_bidi_remote(1 << 16);
  tp.set_integer(wire::tp_id::kInitialMaxStreamDataUni, 1 << 16);
  tp.set_initial_max_streams_bidi(100);
  tp.set_integer(wire::tp_id::kInitialMaxStreamsUni, 100);
  return tp;
}

struct Server::Connection {
  struct SpaceState {
    std::uint64_t next_pn = 0;
    std::set<std::uint64_t> received;
    std::optional<std::uint64_t> largest_received;
    std::optional<std::uint64_t> largest_acked;
    bool ack_pending = false;
    std::optional<wire::AckFrame> ack_override;
  };

  struct Outstanding {
    EncryptionLevel level;
    std::vector<Frame> frames;
  };

  struct Stream {
    conn::StreamReassembler recv;
    bool first_frame_seen = false;
    bool livelocked = false;
    bool responding = false;
    Bytes response;
    std::uint64_t sent = 0;
    std::uint64_t limit = 0;
    bool fin_sent = false;
    std::optional<std::uint64_t> blocked_at;
  };

  Connection(Server& server, const LongPrefix& first, std::uint64_t index)
      : srv(server), odcid(first.dcid), client_cid(first.scid) {
    std::mt19937_64 rng(server.config_.seed ^ (0x9e3779b97f4a7c15ULL * (index + 1)));
    Bytes cid(kCidLength);
    for (auto& b : cid) b = static_cast<std::uint8_t>(rng());
    our_cid = wire::ConnectionId(cid);

    const auto [client_keys, server_keys] = protection::derive_initial_keys(odcid, wire::kQuicVersion1);
    read_keys[index_of(EncryptionLevel::initial)] = client_keys;
    write_keys[index_of(EncryptionLevel::initial)] = server_keys;

    protection::NullProviderConfig pc;
    pc.role = protection::Role::server;
    pc.seed = server.config_.seed;
    pc.nonce = index;
    pc.accept_early_data = fault() != Fault::reject_0rtt;
    pc.local_transport_parameters = local_parameters();
    provider = std::make_unique<protection::NullHandshakeProvider>(pc);
    last_activity = Clock::now();
  }

  Fault fault() const { return srv.config_.fault; }

  Bytes local_parameters() const {
    auto tp = srv.config_.parameters;
    tp.set_original_dcid(odcid);
    tp.set_initial_scid(our_cid);
    auto bytes = wire::encode_transport_parameters(tp);
    if (fault() == Fault::tp_duplicate) {
      const auto dup = wire::encode_transport_parameter(
          wire::tp_id::kInitialMaxData, wire::as_span(wire::encode_varint(4096)));
      bytes.insert(bytes.end(), dup.begin(), dup.end());
    }
    return bytes;
  }

  // -- receive ------------------------------------------------------------

  void receive_datagram(ByteSpan data) {
    last_activity = Clock::now();
    bytes_received += data.size();
    std::size_t pos = 0;
    while (pos < data.size() && !closed) {
      const auto rest = data.subspan(pos);
      wire::ParsedHeader prefix;
      try {
        prefix = wire::parse_header_prefix(rest, {kCidLength, std::nullopt});
      } catch (const wire::ParseError&) {
        return;
      }
      const auto level = protection::level_of(prefix.header.type);
      if (!level) return;
      const auto end = prefix.packet_end;
      const auto& keys = read_keys[index_of(*level)];
      if (keys) {
        try {
          auto& sp = spaces[space_of(*level)];
          auto pkt = protection::unprotect(rest, *keys, sp.largest_received, kCidLength);
          on_packet(*level, pkt);
        } catch (const protection::DecryptError&) {
        } catch (const wire::ParseError&) {
        }
      }
      if (end == 0 || end > rest.size()) return;
      pos += end;
    }
  }

  void on_packet(EncryptionLevel level, const protection::UnprotectedPacket& pkt) {
    auto parsed = wire::parse_frames(wire::as_span(pkt.plaintext));
    const auto pn = pkt.header.packet_number;
    auto& sp = spaces[space_of(level)];
    if (!sp.received.insert(pn).second) return;

    const bool reordered = sp.largest_received && pn < *sp.largest_received;
    if (!sp.largest_received || pn > *sp.largest_received) sp.largest_received = pn;
    if (level == EncryptionLevel::handshake) validated = true;

    if (wire::is_ack_eliciting(parsed.frames)) {
      sp.ack_pending = true;
      if (reordered && space_of(level) == kAppSpace && fault() == Fault::ack_gap_overflow &&
          !ack_gap_sent) {
        wire::AckFrame ack;
        ack.largest_acked = *sp.largest_received;
        ack.first_range = 0;
        ack.ranges.push_back({wire::kMaxVarint, 0});
        sp.ack_override = ack;
        ack_gap_sent = true;
      }
    }

    for (const auto& f : parsed.frames) {
      if (const auto* c = std::get_if<wire::CryptoFrame>(&f)) {
        on_crypto(level, *c);
      } else if (const auto* a = std::get_if<wire::AckFrame>(&f)) {
        on_ack(level, *a);
      } else if (const auto* s = std::get_if<wire::StreamFrame>(&f)) {
        on_stream(*s);
      } else if (const auto* m = std::get_if<wire::MaxStreamDataFrame>(&f)) {
        auto& st = stream(m->stream_id);
        if (m->maximum > st.limit) {
          st.limit = m->maximum;
          send_stream(m->stream_id);
        }
      } else if (std::holds_alternative<wire::ConnectionCloseFrame>(f)) {
        closed = true;
        return;
      }
    }
  }

  void on_crypto(EncryptionLevel level, const wire::CryptoFrame& f) {
    auto& rs = crypto_recv[index_of(level)];
    const auto before = rs.contiguous().size();
    if (rs.insert(f.offset, wire::as_span(f.data), false) == 0) return;
    const auto fresh = wire::as_span(rs.contiguous()).subspan(before);
    std::vector<protection::CryptoOutput> out;
    try {
      out = provider->consume(level, fresh);
    } catch (const protection::HandshakeError& e) {
      wire::ConnectionCloseFrame close;
      close.error_code = 0x128;
      close.frame_type = wire::frame_type::kCrypto;
      close.reason = e.what();
      queues[index_of(level)].push_back(close);
      close_after_flush = true;
      return;
    }
    for (auto& o : out) {
      if (fault() == Fault::stall_after_sh && o.level != EncryptionLevel::initial) continue;
      queue_crypto(o);
    }
    for (const auto& k : provider->exported_secrets()) {
      auto& slot = k.direction == protection::Direction::server ? write_keys[index_of(k.level)]
                                                                 : read_keys[index_of(k.level)];
      slot = k;
    }
    if (!have_client_parameters) {
      if (auto tp = provider->peer_transport_parameters()) {
        client_parameters = *tp;
        have_client_parameters = true;
        for (auto& [id, st] : streams) {
          if (st.limit == 0) st.limit = initial_stream_limit();
        }
      }
    }
    if (provider->handshake_complete() && !complete) on_complete();
    if (!burst_sent && fault() == Fault::no_amplification_limit &&
        write_keys[index_of(EncryptionLevel::handshake)]) {
      burst_sent = true;
      amplification_burst();
    }
  }

  void queue_crypto(const protection::CryptoOutput& o) {
    auto& off = crypto_sent[index_of(o.level)];
    for (std::size_t pos = 0; pos < o.data.size(); pos += kStreamChunk) {
      const auto n = std::min(kStreamChunk, o.data.size() - pos);
      wire::CryptoFrame f{off, Bytes(o.data.begin() + pos, o.data.begin() + pos + n)};
      off += n;
      queues[index_of(o.level)].push_back(std::move(f));
    }
  }

  void on_complete() {
    complete = true;
    // Flush pending handshake-level output (ACK of the client Finished) first
    // so HANDSHAKE_DONE travels in its own 1-RTT packet.
    flush();
    send_packet(EncryptionLevel::one_rtt, {wire::HandshakeDoneFrame{}});
    if (fault() != Fault::no_ticket) {
      const auto nst = provider->issue_ticket();
      auto& off = crypto_sent[index_of(EncryptionLevel::one_rtt)];
      wire::CryptoFrame f{off, nst.data};
      off += nst.data.size();
      send_packet(EncryptionLevel::one_rtt, {std::move(f)});
    }
    for (auto& [id, st] : streams) send_stream(id);
  }

  void amplification_burst() {
    for (std::size_t i = 0; i < srv.config_.amplification_burst; ++i) {
      const auto budget = payload_budget(EncryptionLevel::handshake);
      send_packet(EncryptionLevel::handshake,
                  {wire::PingFrame{}, wire::PaddingFrame{budget - 1}});
    }
  }

  void on_ack(EncryptionLevel level, const wire::AckFrame& ack) {
    const auto space = space_of(level);
    auto& sp = spaces[space];
    if (!sp.largest_acked || ack.largest_acked > *sp.largest_acked) {
      sp.largest_acked = ack.largest_acked;
    }
    for (const auto& r : wire::decode_ack_ranges(ack).ranges) {
      auto it = outstanding.lower_bound({space, r.smallest});
      while (it != outstanding.end() && it->first.first == space &&
             it->first.second <= r.largest) {
        it = outstanding.erase(it);
      }
    }
    pto_count = 0;
    rearm_pto();
  }

  // -- streams --------------------------------------------------------------

  std::uint64_t initial_stream_limit() const {
    if (!have_client_parameters) return 0;
    return client_parameters.initial_max_stream_data_bidi_local().value_or(0);
  }

  Stream& stream(std::uint64_t id) {
    auto [it, inserted] = streams.try_emplace(id);
    if (inserted) it->second.limit = initial_stream_limit();
    return it->second;
  }

  void on_stream(const wire::StreamFrame& f) {
    auto& st = stream(f.stream_id);
    if (!st.first_frame_seen) {
      st.first_frame_seen = true;
      if (fault() == Fault::reorder_livelock && f.offset > 0) st.livelocked = true;
    }
    st.recv.insert(f.offset, wire::as_span(f.data), f.fin);
    if (st.livelocked || st.responding || !st.recv.complete()) return;
    st.responding = true;
    st.response = response_for(st.recv.contiguous());
    send_stream(f.stream_id);
  }

  Bytes response_for(const Bytes& request) const {
    const std::string text(request.begin(), request.end());
    static constexpr std::string_view kGet = "GET ";
    if (text.rfind(kGet, 0) != 0) return {};
    auto path = text.substr(kGet.size());
    while (!path.empty() && (path.back() == '\n' || path.back() == '\r')) path.pop_back();
    const auto it = srv.config_.resources.find(path);
    return it == srv.config_.resources.end() ? Bytes{} : it->second;
  }

  void send_stream(std::uint64_t id) {
    auto& st = streams.at(id);
    if (!complete || !st.responding || st.fin_sent) return;
    auto& q = queues[index_of(EncryptionLevel::one_rtt)];
    const auto size = st.response.size();
    const auto limit = fault() == Fault::ignore_stream_limit ? size : st.limit;
    const auto end = std::min<std::uint64_t>(limit, size);

    if (end > st.sent || (size == 0 && !st.fin_sent)) {
      std::vector<wire::StreamFrame> chunk;
      if (size == 0) chunk.push_back({id, 0, {}, true});
      for (auto pos = st.sent; pos < end; pos += kStreamChunk) {
        const auto n = std::min<std::uint64_t>(kStreamChunk, end - pos);
        wire::StreamFrame f{id, pos,
                            Bytes(st.response.begin() + static_cast<std::ptrdiff_t>(pos),
                                  st.response.begin() + static_cast<std::ptrdiff_t>(pos + n)),
                            pos + n == size};
        chunk.push_back(std::move(f));
      }
      // After being blocked, the spamming peer also retransmits data the
      // client has already acknowledged.
      const int copies = fault() == Fault::stream_blocked_spam && st.blocked_at ? 3 : 1;
      for (int c = 0; c < copies; ++c) {
        for (const auto& f : chunk) q.push_back(f);
      }
      st.sent = end;
      st.fin_sent = end == size;
    }

    if (!st.fin_sent && st.sent == limit && st.blocked_at != limit) {
      st.blocked_at = limit;
      switch (fault()) {
        case Fault::empty_stream_frames:
          q.push_back(wire::StreamFrame{id, limit, {}, false});
          q.push_back(wire::StreamDataBlockedFrame{id, limit});
          break;
        case Fault::stream_blocked_spam:
          for (std::size_t i = 0; i < srv.config_.blocked_spam_count; ++i) {
            q.push_back(wire::StreamDataBlockedFrame{id, limit});
          }
          break;
        default:
          q.push_back(wire::StreamDataBlockedFrame{id, limit});
          break;
      }
    }
  }

  // -- send -----------------------------------------------------------------

  wire::PacketHeader header_for(EncryptionLevel level) const {
    wire::PacketHeader h;
    h.type = protection::packet_type_of(level);
    h.dcid = client_cid;
    h.scid = our_cid;
    const auto& sp = spaces[space_of(level)];
    h.packet_number = sp.next_pn;
    h.pn_length = wire::packet_number_length(sp.next_pn, sp.largest_acked);
    h.length_size = 2;
    return h;
  }

  std::size_t payload_budget(EncryptionLevel level) const {
    auto h = header_for(level);
    return kMaxDatagram - wire::serialize_header(h).size() - protection::kAeadOverhead;
  }

  // Returns false when the anti-amplification limit holds the packet back.
  bool send_packet(EncryptionLevel level, std::vector<Frame> frames) {
    const auto& keys = write_keys[index_of(level)];
    if (!keys) return false;
    auto h = header_for(level);
    wire::SerializeOptions opts;
    opts.allow_empty_stream_frames = fault() == Fault::empty_stream_frames;
    const auto payload = wire::serialize_frames(frames, opts);
    auto p = protection::protect_packet(h, wire::as_span(payload), keys.value());

    const bool enforce = !validated && fault() != Fault::no_amplification_limit;
    if (enforce && bytes_sent + p.datagram.size() > kAmplificationFactor * bytes_received) {
      return false;
    }
    auto& sp = spaces[space_of(level)];
    const auto pn = sp.next_pn++;

    if (level == EncryptionLevel::one_rtt && !first_one_rtt_sent) {
      first_one_rtt_sent = true;
      if (fault() == Fault::bad_1rtt_protection) p.datagram.back() ^= 0xff;
    }
    srv.transmit(*this, p.datagram, level, p.cleartext());
    bytes_sent += p.datagram.size();

    if (wire::is_ack_eliciting(frames)) {
      Outstanding o{level, {}};
      for (auto& f : frames) {
        if (retransmittable(f)) o.frames.push_back(std::move(f));
      }
      if (!o.frames.empty()) outstanding[{space_of(level), pn}] = std::move(o);
      if (!pto_deadline) rearm_pto();
    }
    return true;
  }

  std::optional<wire::AckFrame> take_ack(Space space) {
    auto& sp = spaces[space];
    if (!sp.ack_pending) return std::nullopt;
    sp.ack_pending = false;
    if (sp.ack_override) {
      auto ack = *sp.ack_override;
      sp.ack_override.reset();
      return ack;
    }
    std::vector<wire::PacketRange> ranges;
    for (auto it = sp.received.rbegin(); it != sp.received.rend() && ranges.size() < 32; ++it) {
      if (!ranges.empty() && ranges.back().smallest == *it + 1) {
        ranges.back().smallest = *it;
      } else {
        ranges.push_back({*it, *it});
      }
    }
    return wire::make_ack_frame(ranges);
  }

  void flush() {
    for (const auto level :
         {EncryptionLevel::initial, EncryptionLevel::handshake, EncryptionLevel::one_rtt}) {
      if (!write_keys[index_of(level)]) continue;
      if (level == EncryptionLevel::one_rtt && !complete) continue;
      auto& q = queues[index_of(level)];
      const auto space = space_of(level);
      const bool ack_ready = spaces[space].ack_pending;
      if (q.empty() && !ack_ready) continue;

      auto ack = take_ack(space);
      while (ack || !q.empty()) {
        const auto budget = payload_budget(level);
        std::vector<Frame> frames;
        std::size_t used = 0;
        if (ack) {
          used += wire::serialized_size(*ack);
          frames.push_back(*ack);
          ack.reset();
        }
        while (!q.empty() && used + wire::serialized_size(q.front()) <= budget) {
          used += wire::serialized_size(q.front());
          frames.push_back(std::move(q.front()));
          q.pop_front();
        }
        if (frames.empty()) {
          // Oversized frame; chunking keeps this from happening.
          q.pop_front();
          continue;
        }
        if (!send_packet(level, frames)) {
          for (auto it = frames.rbegin(); it != frames.rend(); ++it) {
            if (retransmittable(*it)) q.push_front(std::move(*it));
          }
          return;
        }
      }
    }
    if (close_after_flush) closed = true;
  }

  // -- timers ---------------------------------------------------------------

  void rearm_pto() {
    if (outstanding.empty()) {
      pto_deadline.reset();
      return;
    }
    pto_deadline = Clock::now() + kPtoBase * (1 << std::min(pto_count, kPtoMaxShift));
  }

  void on_pto() {
    pto_deadline.reset();
    ++pto_count;
    for (auto& [key, o] : outstanding) {
      auto& q = queues[index_of(o.level)];
      for (auto& f : o.frames) q.push_back(std::move(f));
    }
    outstanding.clear();
    flush();
    if (!pto_deadline) rearm_pto();
  }

  Server& srv;
  sockaddr_storage peer{};
  socklen_t peer_len = 0;
  wire::ConnectionId odcid;
  wire::ConnectionId client_cid;
  wire::ConnectionId our_cid;
  std::unique_ptr<protection::NullHandshakeProvider> provider;
  std::array<std::optional<protection::KeyMaterial>, protection::kLevelCount> read_keys;
  std::array<std::optional<protection::KeyMaterial>, protection::kLevelCount> write_keys;
  std::array<SpaceState, 3> spaces;
  std::array<conn::StreamReassembler, protection::kLevelCount> crypto_recv;
  std::array<std::uint64_t, protection::kLevelCount> crypto_sent{};
  std::array<std::deque<Frame>, protection::kLevelCount> queues;
  std::map<std::pair<std::size_t, std::uint64_t>, Outstanding> outstanding;
  std::map<std::uint64_t, Stream> streams;
  wire::TransportParameters client_parameters;
  bool have_client_parameters = false;
  std::optional<Clock::time_point> pto_deadline;
  int pto_count = 0;
  std::uint64_t bytes_received = 0;
  std::uint64_t bytes_sent = 0;
  bool validated = false;
  bool complete = false;
  bool closed = false;
  bool close_after_flush = false;
  bool first_one_rtt_sent = false;
  bool ack_gap_sent = false;
  bool burst_sent = false;
  Clock::time_point last_activity;
};

Server::Server(ServerConfig config) : config_(std::move(config)) {
  const auto ep = conn::Endpoint::parse(config_.listen, true);
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_DGRAM;
  hints.ai_flags = AI_PASSIVE | AI_NUMERICSERV;
  addrinfo* res = nullptr;
  const auto port = std::to_string(ep.port);
  if (const int rc = ::getaddrinfo(ep.host.empty() ? nullptr : ep.host.c_str(), port.c_str(),
                                   &hints, &res);
      rc != 0) {
    throw std::runtime_error("cannot resolve " + config_.listen + ": " + ::gai_strerror(rc));
  }
  for (auto* ai = res; ai != nullptr; ai = ai->ai_next) {
    fd_ = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd_ < 0) continue;
    if (::bind(fd_, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd_);
    fd_ = -1;
  }
  ::freeaddrinfo(res);
  if (fd_ < 0) throw std::runtime_error("cannot bind " + config_.listen);

  sockaddr_storage local{};
  socklen_t len = sizeof local;
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&local), &len);
  port_ = ntohs(local.ss_family == AF_INET6
                    ? reinterpret_cast<sockaddr_in6*>(&local)->sin6_port
                    : reinterpret_cast<sockaddr_in*>(&local)->sin_port);
  wake_fd_ = ::eventfd(0, EFD_NONBLOCK);
  epoch_ = Clock::now();
}

Server::~Server() {
  stop();
  if (fd_ >= 0) ::close(fd_);
  if (wake_fd_ >= 0) ::close(wake_fd_);
}

void Server::start() {
  if (running_.exchange(true)) return;
  thread_ = std::thread([this] { loop(); });
}

void Server::stop() {
  if (!running_.exchange(false)) return;
  const std::uint64_t one = 1;
  [[maybe_unused]] auto n = ::write(wake_fd_, &one, sizeof one);
  if (thread_.joinable()) thread_.join();
}

std::string Server::address() const {
  const auto ep = conn::Endpoint::parse(config_.listen, true);
  return conn::Endpoint{ep.host, port_}.to_string();
}

std::vector<traces::PacketRecord> Server::sent_log() const {
  std::lock_guard lock(log_mu_);
  return log_;
}

void Server::transmit(const Connection& c, const Bytes& datagram,
                      std::optional<EncryptionLevel> level, Bytes cleartext) {
  transmit_raw(datagram, &c.peer, c.peer_len, level, std::move(cleartext),
               level == EncryptionLevel::one_rtt ? std::optional<std::size_t>(c.client_cid.size())
                                                 : std::nullopt);
}

void Server::transmit_raw(const Bytes& datagram, const void* addr, unsigned addr_len,
                          std::optional<EncryptionLevel> level, Bytes cleartext,
                          std::optional<std::size_t> dcid_len) {
  ::sendto(fd_, datagram.data(), datagram.size(), 0, static_cast<const sockaddr*>(addr),
           addr_len);
  traces::PacketRecord rec;
  rec.direction = traces::Direction::tx;
  rec.timestamp_ms =
      std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - epoch_).count();
  rec.level = level;
  rec.cleartext = std::move(cleartext);
  rec.dcid_len = dcid_len;
  std::lock_guard lock(log_mu_);
  log_.push_back(std::move(rec));
}

void Server::loop() {
  std::array<std::uint8_t, 65536> buf{};
  while (running_) {
    auto timeout = 1000ms;
    const auto now = Clock::now();
    for (const auto& c : conns_) {
      if (c->pto_deadline) {
        timeout = std::min(timeout, std::chrono::duration_cast<std::chrono::milliseconds>(
                                        *c->pto_deadline - now));
      }
    }
    pollfd fds[2] = {{fd_, POLLIN, 0}, {wake_fd_, POLLIN, 0}};
    const int wait = static_cast<int>(std::max<std::int64_t>(timeout.count(), 0));
    if (::poll(fds, 2, wait) < 0) continue;
    if (fds[1].revents != 0) break;
    if (fds[0].revents & POLLIN) {
      sockaddr_storage from{};
      socklen_t from_len = sizeof from;
      const auto n = ::recvfrom(fd_, buf.data(), buf.size(), 0,
                                reinterpret_cast<sockaddr*>(&from), &from_len);
      if (n > 0) {
        on_datagram(Bytes(buf.begin(), buf.begin() + n), &from, from_len);
      }
    }
    on_timers();
  }
}

void Server::on_datagram(const Bytes& data, const void* addr, unsigned addr_len) {
  if (data.empty()) return;
  Connection* c = nullptr;
  if (data[0] & 0x80) {
    const auto prefix = read_long_prefix(wire::as_span(data));
    if (!prefix || prefix->version == 0) return;
    if (prefix->version != wire::kQuicVersion1) {
      if (data.size() < kMinClientInitial || config_.fault == Fault::vn_silent) return;
      wire::PacketHeader vn;
      vn.type = wire::PacketType::version_negotiation;
      vn.version = 0;
      vn.dcid = prefix->scid;
      vn.scid = prefix->dcid;
      vn.unused_bits = 0x4a;
      vn.supported_versions = {wire::kQuicVersion1};
      if (config_.fault == Fault::vn_echo_reserved) {
        vn.supported_versions.push_back(prefix->version);
      }
      const auto bytes = wire::serialize_header(vn);
      transmit_raw(bytes, addr, addr_len, std::nullopt, bytes, std::nullopt);
      return;
    }
    if (const auto it = routes_.find(prefix->dcid.bytes()); it != routes_.end()) {
      c = it->second;
    } else {
      const bool initial = (data[0] & 0x30) == 0;
      if (!initial || data.size() < kMinClientInitial || prefix->dcid.size() < 8) return;
      auto conn = std::make_unique<Connection>(*this, *prefix, next_cid_seed_++);
      c = conn.get();
      routes_[c->odcid.bytes()] = c;
      routes_[c->our_cid.bytes()] = c;
      conns_.push_back(std::move(conn));
      ++accepted_;
    }
  } else {
    if (data.size() < 1 + kCidLength) return;
    const Bytes dcid(data.begin() + 1, data.begin() + 1 + kCidLength);
    const auto it = routes_.find(dcid);
    if (it == routes_.end()) return;
    c = it->second;
  }
  std::memcpy(&c->peer, addr, addr_len);
  c->peer_len = addr_len;
  c->receive_datagram(wire::as_span(data));
  if (!c->closed) c->flush();
}

void Server::on_timers() {
  const auto now = Clock::now();
  for (auto& c : conns_) {
    if (c->pto_deadline && *c->pto_deadline <= now && !c->closed) c->on_pto();
  }
  std::erase_if(conns_, [&](const std::unique_ptr<Connection>& c) {
    if (!c->closed && now - c->last_activity < kIdleTimeout) return false;
    std::erase_if(routes_, [&](const auto& r) { return r.second == c.get(); });
    return true;
  });
}

}  // namespace qtracker::faultsrv
