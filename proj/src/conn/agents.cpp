// The nine standard agents. Each keeps only per-connection state and talks to
// the rest of the client through events and effects.

#include <algorithm>

#include "qtracker/conn/connection.hpp"
#include "qtracker/protection/packet_protection.hpp"

namespace qtracker::conn {

namespace {

using protection::EncryptionLevel;

template <typename F>
std::vector<const F*> frames_of(const std::vector<wire::Frame>& frames) {
  std::vector<const F*> out;
  for (const auto& f : frames) {
    if (const auto* p = std::get_if<F>(&f)) out.push_back(p);
  }
  return out;
}

class SimpleAgent : public Agent {
 public:
  SimpleAgent(AgentId id, std::initializer_list<EventKind> kinds) : id_(id) {
    for (auto k : kinds) kinds_.set(static_cast<std::size_t>(k));
  }
  AgentId id() const override { return id_; }
  bool subscribes(EventKind kind) const override {
    return kinds_.test(static_cast<std::size_t>(kind));
  }

 private:
  AgentId id_;
  std::bitset<kEventKindCount> kinds_;
};

/// UDP send side: writes PacketSent datagrams and logs them.
class SocketAgent final : public SimpleAgent {
 public:
  SocketAgent() : SimpleAgent(AgentId::socket, {EventKind::packet_sent}) {}

  Effects handle(Connection& c, const Event& ev) override {
    const auto& p = std::get<PacketSent>(ev);
    c.transport().send(wire::as_span(p.datagram));
    c.bytes_sent += p.datagram.size();
    traces::PacketRecord rec;
    rec.direction = traces::Direction::tx;
    rec.timestamp_ms = c.now_ms();
    rec.level = p.level;
    rec.cleartext = p.cleartext;
    if (!p.header.is_long()) rec.dcid_len = p.header.dcid.size();
    c.log_packet(std::move(rec));
    return {};
  }
};

/// Removes protection, parses frames and emits PacketReceived. Packets for
/// levels without keys are held until the keys appear.
class ParserAgent final : public SimpleAgent {
 public:
  ParserAgent()
      : SimpleAgent(AgentId::parser,
                    {EventKind::datagram_received, EventKind::new_keys_available}) {}

  Effects handle(Connection& c, const Event& ev) override {
    Effects fx;
    if (const auto* d = std::get_if<DatagramReceived>(&ev)) {
      c.bytes_received += d->data.size();
      ++c.datagrams_received;
      process_datagram(c, wire::as_span(d->data), d->timestamp, fx);
    } else if (const auto* k = std::get_if<NewKeysAvailable>(&ev)) {
      if (!c.read_key(k->level)) return fx;
      auto pending = std::exchange(buffered_[static_cast<std::size_t>(k->level)], {});
      for (const auto& [bytes, ts] : pending) process_datagram(c, wire::as_span(bytes), ts, fx);
    }
    return fx;
  }

 private:
  static constexpr std::size_t kMaxBuffered = 64;

  void process_datagram(Connection& c, wire::ByteSpan data, TimePoint ts, Effects& fx) {
    std::size_t offset = 0;
    while (offset < data.size()) {
      const auto consumed = process_packet(c, data.subspan(offset), ts, fx);
      if (!consumed) break;
      offset += *consumed;
    }
  }

  std::optional<std::size_t> process_packet(Connection& c, wire::ByteSpan rest, TimePoint ts,
                                            Effects& fx) {
    wire::HeaderParseContext ctx;
    ctx.short_dcid_length = c.scid().size();
    wire::ParsedHeader prefix;
    try {
      prefix = wire::parse_header_prefix(rest, ctx);
    } catch (const wire::ParseError& e) {
      c.malformed_packets().push_back(e.what());
      return std::nullopt;
    }

    const auto type = prefix.header.type;
    if (type == wire::PacketType::version_negotiation || type == wire::PacketType::retry) {
      traces::PacketRecord rec{traces::Direction::rx, c.now_ms(), std::nullopt,
                               Bytes(rest.begin(), rest.end()), std::nullopt, std::nullopt};
      try {
        const auto parsed = wire::parse_header(rest, ctx);
        fx.push_back(EmitEvent{PacketReceived{parsed.header, {}, std::nullopt, ts, {}}});
      } catch (const wire::ParseError& e) {
        rec.parse_error = e.what();
        c.malformed_packets().push_back(e.what());
      }
      c.log_packet(std::move(rec));
      return std::nullopt;
    }

    const auto level = *protection::level_of(type);
    const std::size_t size = prefix.packet_end;
    const auto* key = c.read_key(level);
    if (!key) {
      auto& buf = buffered_[static_cast<std::size_t>(level)];
      if (buf.size() < kMaxBuffered) buf.push_back({Bytes(rest.begin(), rest.begin() + size), ts});
      return size;
    }

    auto& sp = c.space(level);
    protection::UnprotectedPacket un;
    try {
      un = protection::unprotect(rest.first(size), *key, sp.largest_received,
                                 ctx.short_dcid_length);
    } catch (const protection::DecryptError& e) {
      DecryptionFailed df{level, e.what()};
      c.decryption_failures().push_back(df);
      fx.push_back(EmitEvent{df});
      return size;
    } catch (const wire::ParseError& e) {
      c.malformed_packets().push_back(e.what());
      return size;
    }

    const std::uint64_t pn = un.header.packet_number;
    sp.largest_received = std::max(sp.largest_received.value_or(0), pn);
    if (!c.dcid_switched() && un.header.is_long()) c.set_dcid(un.header.scid);

    traces::PacketRecord rec{traces::Direction::rx, c.now_ms(), level, un.cleartext(),
                             std::nullopt, std::nullopt};
    if (!un.header.is_long()) rec.dcid_len = ctx.short_dcid_length;
    try {
      auto parsed = wire::parse_frames(wire::as_span(un.plaintext));
      c.log_packet(std::move(rec));
      fx.push_back(EmitEvent{PacketReceived{std::move(un.header), std::move(parsed.frames), level,
                                            ts, std::move(parsed.anomalies)}});
    } catch (const wire::ParseError& e) {
      rec.parse_error = e.what();
      c.log_packet(std::move(rec));
      c.malformed_packets().push_back(e.what());
    }
    return size;
  }

  std::array<std::vector<std::pair<Bytes, TimePoint>>, protection::kLevelCount> buffered_;
};

/// Feeds CRYPTO data to the handshake provider and installs exported keys.
class TlsAgent final : public SimpleAgent {
 public:
  TlsAgent() : SimpleAgent(AgentId::tls, {EventKind::packet_received}) {}

  Effects handle(Connection& c, const Event& ev) override {
    const auto& p = std::get<PacketReceived>(ev);
    Effects fx;
    if (!p.level) return fx;
    for (const auto* f : frames_of<wire::CryptoFrame>(p.frames)) {
      auto& rs = c.crypto_stream(*p.level);
      const std::size_t before = rs.contiguous().size();
      if (rs.insert(f->offset, wire::as_span(f->data), false) == 0) continue;
      const Bytes fresh(rs.contiguous().begin() + static_cast<std::ptrdiff_t>(before),
                        rs.contiguous().end());
      std::vector<protection::CryptoOutput> out;
      try {
        out = c.provider().consume(*p.level, wire::as_span(fresh));
      } catch (const protection::HandshakeError& e) {
        c.progress().tls_error = e.what();
        fx.push_back(CloseConnection{0x128, e.what(), false});  // handshake_failure alert
        return fx;
      }
      auto more = c.absorb_provider_output(out);
      fx.insert(fx.end(), more.begin(), more.end());
    }
    return fx;
  }
};

/// Acknowledges ack-eliciting packets.
class AckAgent final : public SimpleAgent {
 public:
  AckAgent() : SimpleAgent(AgentId::ack, {EventKind::packet_received}) {}

  Effects handle(Connection& c, const Event& ev) override {
    const auto& p = std::get<PacketReceived>(ev);
    if (!p.level) return {};
    auto& sp = c.space(*p.level);
    sp.received.insert(p.header.packet_number);
    if (!wire::is_ack_eliciting(p.frames)) return {};

    std::vector<wire::PacketRange> ranges;
    for (auto it = sp.received.rbegin(); it != sp.received.rend() && ranges.size() < kMaxRanges;
         ++it) {
      if (!ranges.empty() && ranges.back().smallest == *it + 1) {
        ranges.back().smallest = *it;
      } else {
        ranges.push_back({*it, *it});
      }
    }
    const auto level =
        *p.level == EncryptionLevel::zero_rtt ? EncryptionLevel::one_rtt : *p.level;
    return {QueueFrame{level, wire::make_ack_frame(ranges, 0)}};
  }

 private:
  static constexpr std::size_t kMaxRanges = 32;
};

/// Stream reassembly and flow-control ledgers.
class FlowControlAgent final : public SimpleAgent {
 public:
  FlowControlAgent()
      : SimpleAgent(AgentId::flow_control,
                    {EventKind::packet_received, EventKind::flow_control_raise}) {}

  Effects handle(Connection& c, const Event& ev) override {
    Effects fx;
    if (const auto* r = std::get_if<FlowControlRaise>(&ev)) {
      if (r->stream_id) {
        auto& st = c.stream(*r->stream_id);
        st.recv_limit = std::max(st.recv_limit, r->new_limit);
        fx.push_back(QueueFrame{EncryptionLevel::one_rtt,
                                wire::MaxStreamDataFrame{*r->stream_id, st.recv_limit}});
      } else {
        fx.push_back(QueueFrame{EncryptionLevel::one_rtt, wire::MaxDataFrame{r->new_limit}});
      }
      return fx;
    }
    const auto& p = std::get<PacketReceived>(ev);
    for (const auto& f : p.frames) {
      if (const auto* s = std::get_if<wire::StreamFrame>(&f)) {
        auto& st = c.stream(s->stream_id);
        const bool was_complete = st.recv.complete();
        const auto added = st.recv.insert(s->offset, wire::as_span(s->data), s->fin);
        if (added > 0 || (st.recv.complete() && !was_complete)) {
          fx.push_back(EmitEvent{StreamDataReadable{s->stream_id}});
        }
      } else if (const auto* m = std::get_if<wire::MaxStreamDataFrame>(&f)) {
        auto& st = c.stream(m->stream_id);
        st.send_limit = std::max(st.send_limit, m->maximum);
      } else if (const auto* md = std::get_if<wire::MaxDataFrame>(&f)) {
        c.raise_connection_send_limit(md->maximum);
      }
    }
    return fx;
  }
};

/// Starts the handshake and tracks how far it got.
class HandshakeAgent final : public SimpleAgent {
 public:
  HandshakeAgent()
      : SimpleAgent(AgentId::handshake,
                    {EventKind::connection_started, EventKind::packet_received}) {}

  Effects handle(Connection& c, const Event& ev) override {
    if (std::holds_alternative<ConnectionStarted>(ev)) {
      c.progress().started = true;
      return c.absorb_provider_output(c.provider().start());
    }
    const auto& p = std::get<PacketReceived>(ev);
    if (p.header.type == wire::PacketType::version_negotiation) {
      c.progress().version_negotiation = true;
      c.progress().offered_versions = p.header.supported_versions;
    }
    if (!frames_of<wire::HandshakeDoneFrame>(p.frames).empty()) {
      c.progress().handshake_done_received = true;
    }
    return {};
  }
};

/// Timer-only loss detection: anything unacknowledged after the fixed
/// timeout is declared lost and its frames are queued again.
class RetransmissionAgent final : public SimpleAgent {
 public:
  RetransmissionAgent()
      : SimpleAgent(AgentId::retransmission,
                    {EventKind::packet_sent, EventKind::packet_received, EventKind::timeout,
                     EventKind::loss_detected}) {}

  Effects handle(Connection& c, const Event& ev) override {
    Effects fx;
    const auto rto = c.config().retransmission_timeout;
    if (const auto* s = std::get_if<PacketSent>(&ev)) {
      if (!wire::is_ack_eliciting(s->frames)) return fx;
      std::vector<wire::Frame> keep;
      for (const auto& f : s->frames) {
        if (std::holds_alternative<wire::AckFrame>(f) ||
            std::holds_alternative<wire::PaddingFrame>(f) ||
            std::holds_alternative<wire::ConnectionCloseFrame>(f)) {
          continue;
        }
        keep.push_back(f);
      }
      outstanding_[{space_of(s->level), s->header.packet_number}] = {s->level, std::move(keep),
                                                                     s->timestamp};
      if (!armed_) {
        armed_ = true;
        fx.push_back(ArmTimer{kTimer, rto});
      }
    } else if (const auto* r = std::get_if<PacketReceived>(&ev)) {
      if (!r->level) return fx;
      const auto sp = space_of(*r->level);
      for (const auto* ack : frames_of<wire::AckFrame>(r->frames)) {
        auto& space = c.space(*r->level);
        if (ack->largest_acked < space.next_pn) {
          space.largest_acked = std::max(space.largest_acked.value_or(0), ack->largest_acked);
        }
        for (const auto& range : wire::decode_ack_ranges(*ack).ranges) {
          std::erase_if(outstanding_, [&](const auto& kv) {
            return kv.first.first == sp && kv.first.second >= range.smallest &&
                   kv.first.second <= range.largest;
          });
        }
      }
      if (outstanding_.empty() && armed_) {
        armed_ = false;
        fx.push_back(CancelTimer{kTimer});
      }
    } else if (const auto* t = std::get_if<Timeout>(&ev)) {
      if (t->timer_id != kTimer) return fx;
      armed_ = false;
      const auto now = Clock::now();
      std::map<EncryptionLevel, std::vector<std::uint64_t>> lost;
      std::optional<TimePoint> earliest_remaining;
      for (const auto& [key, o] : outstanding_) {
        if (o.sent + rto <= now + 1ms) {
          lost[o.level].push_back(key.second);
        } else if (!earliest_remaining || o.sent < *earliest_remaining) {
          earliest_remaining = o.sent;
        }
      }
      for (auto& [level, pns] : lost) fx.push_back(EmitEvent{LossDetected{level, std::move(pns)}});
      if (earliest_remaining) {
        armed_ = true;
        fx.push_back(ArmTimer{kTimer, *earliest_remaining + rto - now});
      }
    } else if (const auto* l = std::get_if<LossDetected>(&ev)) {
      for (auto pn : l->packet_numbers) {
        auto it = outstanding_.find({space_of(l->level), pn});
        if (it == outstanding_.end()) continue;
        for (auto& f : it->second.frames) fx.push_back(QueueFrame{l->level, std::move(f)});
        outstanding_.erase(it);
      }
    }
    return fx;
  }

 private:
  static constexpr const char* kTimer = "retransmission";
  struct Outstanding {
    EncryptionLevel level;
    std::vector<wire::Frame> frames;
    TimePoint sent;
  };
  std::map<std::pair<PnSpaceId, std::uint64_t>, Outstanding> outstanding_;
  bool armed_ = false;
};

/// Drains frame queues into packets, splitting STREAM and CRYPTO data to fit.
class BundlerAgent final : public SimpleAgent {
 public:
  BundlerAgent()
      : SimpleAgent(AgentId::bundler, {EventKind::frames_queued, EventKind::new_keys_available}) {}

  Effects handle(Connection& c, const Event& ev) override {
    const EncryptionLevel level = std::holds_alternative<FramesQueued>(ev)
                                      ? std::get<FramesQueued>(ev).level
                                      : std::get<NewKeysAvailable>(ev).level;
    Effects fx;
    auto& q = c.queue(level);
    if (c.closed()) {
      q.clear();
      return fx;
    }
    if (!c.write_key(level)) return fx;
    if (c.closing()) {
      std::erase_if(q, [](const wire::Frame& f) {
        return !std::holds_alternative<wire::ConnectionCloseFrame>(f);
      });
    }
    const std::size_t budget = c.payload_budget(level);
    while (!q.empty()) {
      std::vector<wire::Frame> packet;
      std::size_t used = 0;
      while (!q.empty()) {
        auto& f = q.front();
        const std::size_t size = wire::serialized_size(f);
        if (used + size <= budget) {
          check_flow_control(c, f);
          packet.push_back(std::move(f));
          q.pop_front();
          used += size;
          continue;
        }
        if (auto piece = split_front(f, budget - used)) {
          check_flow_control(c, *piece);
          packet.push_back(std::move(*piece));
        } else if (packet.empty()) {
          q.pop_front();
          throw std::logic_error("frame does not fit in a packet");
        }
        break;
      }
      if (packet.empty()) break;
      fx.push_back(EmitEvent{c.build_packet(level, std::move(packet))});
    }
    return fx;
  }

 private:
  /// Cuts off as much of a STREAM or CRYPTO frame as fits in `room` bytes.
  static std::optional<wire::Frame> split_front(wire::Frame& f, std::size_t room) {
    auto cut = [room](auto& frame, auto make_piece) -> std::optional<wire::Frame> {
      auto empty = frame;
      empty.data.clear();
      // One extra byte for the length varint growing to two bytes.
      const std::size_t overhead = wire::serialized_size(wire::Frame{empty}) + 1;
      if (room <= overhead + 1) return std::nullopt;
      const std::size_t take = std::min(room - overhead, frame.data.size());
      auto piece = make_piece(frame, take);
      frame.offset += take;
      frame.data.erase(frame.data.begin(), frame.data.begin() + static_cast<std::ptrdiff_t>(take));
      return piece;
    };
    if (auto* s = std::get_if<wire::StreamFrame>(&f)) {
      if (s->data.size() < 2) return std::nullopt;
      return cut(*s, [](const wire::StreamFrame& s, std::size_t take) {
        return wire::Frame{wire::StreamFrame{
            s.stream_id, s.offset, Bytes(s.data.begin(), s.data.begin() + static_cast<std::ptrdiff_t>(take)),
            false}};
      });
    }
    if (auto* cf = std::get_if<wire::CryptoFrame>(&f)) {
      if (cf->data.size() < 2) return std::nullopt;
      return cut(*cf, [](const wire::CryptoFrame& cf, std::size_t take) {
        return wire::Frame{wire::CryptoFrame{
            cf.offset, Bytes(cf.data.begin(), cf.data.begin() + static_cast<std::ptrdiff_t>(take))}};
      });
    }
    return std::nullopt;
  }

  static void check_flow_control(Connection& c, const wire::Frame& f) {
    const auto* s = std::get_if<wire::StreamFrame>(&f);
    if (!s) return;
    const auto* st = c.find_stream(s->stream_id);
    if (st && s->offset + s->data.size() > st->send_limit) {
      throw std::logic_error("flow control: stream " + std::to_string(s->stream_id) +
                             " data beyond peer limit " + std::to_string(st->send_limit));
    }
  }
};

/// CONNECTION_CLOSE in both directions.
class ClosingAgent final : public SimpleAgent {
 public:
  ClosingAgent()
      : SimpleAgent(AgentId::closing, {EventKind::packet_received, EventKind::close_requested,
                                       EventKind::packet_sent}) {}

  Effects handle(Connection& c, const Event& ev) override {
    Effects fx;
    if (const auto* p = std::get_if<PacketReceived>(&ev)) {
      for (const auto* cc : frames_of<wire::ConnectionCloseFrame>(p->frames)) {
        if (c.closed()) break;
        c.mark_closed({cc->error_code, cc->reason, true});
        fx.push_back(EmitEvent{ConnectionClosed{cc->error_code, cc->reason, true}});
      }
    } else if (const auto* r = std::get_if<CloseRequested>(&ev)) {
      if (c.closing() || c.closed()) return fx;
      c.set_closing();
      EncryptionLevel level = EncryptionLevel::initial;
      for (auto l : {EncryptionLevel::one_rtt, EncryptionLevel::handshake}) {
        if (c.write_key(l)) {
          level = l;
          break;
        }
      }
      wire::ConnectionCloseFrame frame;
      frame.application = r->application && level == EncryptionLevel::one_rtt;
      frame.error_code = r->error_code;
      frame.reason = r->reason;
      fx.push_back(QueueFrame{level, std::move(frame)});
    } else if (const auto* s = std::get_if<PacketSent>(&ev)) {
      for (const auto* cc : frames_of<wire::ConnectionCloseFrame>(s->frames)) {
        if (c.closed()) break;
        c.mark_closed({cc->error_code, cc->reason, false});
        fx.push_back(EmitEvent{ConnectionClosed{cc->error_code, cc->reason, false}});
      }
    }
    return fx;
  }
};

}  // namespace

std::unique_ptr<Agent> make_agent(AgentId id) {
  switch (id) {
    case AgentId::socket: return std::make_unique<SocketAgent>();
    case AgentId::parser: return std::make_unique<ParserAgent>();
    case AgentId::tls: return std::make_unique<TlsAgent>();
    case AgentId::ack: return std::make_unique<AckAgent>();
    case AgentId::flow_control: return std::make_unique<FlowControlAgent>();
    case AgentId::handshake: return std::make_unique<HandshakeAgent>();
    case AgentId::retransmission: return std::make_unique<RetransmissionAgent>();
    case AgentId::bundler: return std::make_unique<BundlerAgent>();
    case AgentId::closing: return std::make_unique<ClosingAgent>();
  }
  throw std::invalid_argument("unknown agent");
}

}  // namespace qtracker::conn
