#include "qtracker/wire/frames.hpp"

#include <stdexcept>
#include <type_traits>

#include "qtracker/wire/varint.hpp"

namespace qtracker::wire {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

AckRangeDecode decode_ack_ranges(const AckFrame& ack) {
  AckRangeDecode out;
  if (ack.first_range > ack.largest_acked) {
    out.underflow = true;
    return out;
  }
  std::uint64_t smallest = ack.largest_acked - ack.first_range;
  out.ranges.push_back({smallest, ack.largest_acked});
  for (const auto& r : ack.ranges) {
    if (smallest < r.gap + 2) {
      out.underflow = true;
      return out;
    }
    const std::uint64_t largest = smallest - r.gap - 2;
    if (r.length > largest) {
      out.underflow = true;
      return out;
    }
    smallest = largest - r.length;
    out.ranges.push_back({smallest, largest});
  }
  return out;
}

AckFrame make_ack_frame(const std::vector<PacketRange>& ranges,
                        std::uint64_t ack_delay) {
  if (ranges.empty()) throw std::invalid_argument("ACK needs at least one range");
  AckFrame ack;
  ack.ack_delay = ack_delay;
  ack.largest_acked = ranges.front().largest;
  ack.first_range = ranges.front().largest - ranges.front().smallest;
  for (std::size_t i = 1; i < ranges.size(); ++i) {
    const auto& prev = ranges[i - 1];
    const auto& cur = ranges[i];
    if (cur.largest + 2 > prev.smallest || cur.smallest > cur.largest) {
      throw std::invalid_argument("ACK ranges must be descending and disjoint");
    }
    ack.ranges.push_back({prev.smallest - cur.largest - 2, cur.largest - cur.smallest});
  }
  return ack;
}

std::string frame_name(const Frame& f) {
  return std::visit(
      overloaded{
          [](const PaddingFrame&) { return std::string("PADDING"); },
          [](const PingFrame&) { return std::string("PING"); },
          [](const AckFrame&) { return std::string("ACK"); },
          [](const ResetStreamFrame&) { return std::string("RESET_STREAM"); },
          [](const StopSendingFrame&) { return std::string("STOP_SENDING"); },
          [](const CryptoFrame&) { return std::string("CRYPTO"); },
          [](const NewTokenFrame&) { return std::string("NEW_TOKEN"); },
          [](const StreamFrame&) { return std::string("STREAM"); },
          [](const MaxDataFrame&) { return std::string("MAX_DATA"); },
          [](const MaxStreamDataFrame&) { return std::string("MAX_STREAM_DATA"); },
          [](const MaxStreamsFrame&) { return std::string("MAX_STREAMS"); },
          [](const DataBlockedFrame&) { return std::string("DATA_BLOCKED"); },
          [](const StreamDataBlockedFrame&) {
            return std::string("STREAM_DATA_BLOCKED");
          },
          [](const StreamsBlockedFrame&) { return std::string("STREAMS_BLOCKED"); },
          [](const NewConnectionIdFrame&) {
            return std::string("NEW_CONNECTION_ID");
          },
          [](const RetireConnectionIdFrame&) {
            return std::string("RETIRE_CONNECTION_ID");
          },
          [](const PathChallengeFrame&) { return std::string("PATH_CHALLENGE"); },
          [](const PathResponseFrame&) { return std::string("PATH_RESPONSE"); },
          [](const ConnectionCloseFrame&) {
            return std::string("CONNECTION_CLOSE");
          },
          [](const HandshakeDoneFrame&) { return std::string("HANDSHAKE_DONE"); },
      },
      f);
}

bool is_ack_eliciting(const Frame& f) {
  return !std::holds_alternative<PaddingFrame>(f) &&
         !std::holds_alternative<AckFrame>(f) &&
         !std::holds_alternative<ConnectionCloseFrame>(f);
}

bool is_ack_eliciting(const std::vector<Frame>& frames) {
  for (const auto& f : frames) {
    if (is_ack_eliciting(f)) return true;
  }
  return false;
}

std::string_view to_string(AnomalyKind kind) {
  switch (kind) {
    case AnomalyKind::empty_stream_frame: return "empty_stream_frame";
    case AnomalyKind::ack_range_underflow: return "ack_range_underflow";
    case AnomalyKind::non_minimal_varint: return "non_minimal_varint";
  }
  return "unknown";
}

bool ParsedFrames::has(AnomalyKind kind) const {
  for (const auto& a : anomalies) {
    if (a.kind == kind) return true;
  }
  return false;
}

namespace {

class FrameReader {
 public:
  FrameReader(ByteSpan payload, std::size_t base, ParsedFrames& out)
      : r_(payload, base), out_(out) {}

  bool done() const { return r_.empty(); }

  std::uint64_t varint() {
    const auto at = r_.offset();
    bool minimal = true;
    const auto v = r_.read_varint(&minimal);
    if (!minimal) {
      out_.anomalies.push_back(
          {AnomalyKind::non_minimal_varint, out_.frames.size(), at});
    }
    return v;
  }

  Bytes bytes_with_length() {
    const auto at = r_.offset();
    const auto len = varint();
    if (len > r_.remaining()) {
      throw ParseError(at, "length " + std::to_string(len) + " exceeds remaining " +
                               std::to_string(r_.remaining()) + " bytes");
    }
    return r_.read_bytes(static_cast<std::size_t>(len));
  }

  template <std::size_t N>
  std::array<std::uint8_t, N> fixed() {
    auto s = r_.read_span(N);
    std::array<std::uint8_t, N> a{};
    std::copy(s.begin(), s.end(), a.begin());
    return a;
  }

  ByteReader& raw() { return r_; }

  void parse_one() {
    const auto frame_at = r_.offset();
    const auto type = varint();
    const auto index = out_.frames.size();
    using namespace frame_type;

    if (type == kPadding) {
      std::uint64_t n = 1;
      while (!r_.empty() && r_.peek_u8() == 0x00) {
        r_.skip(1);
        ++n;
      }
      if (!out_.frames.empty()) {
        if (auto* prev = std::get_if<PaddingFrame>(&out_.frames.back())) {
          prev->length += n;
          return;
        }
      }
      out_.frames.emplace_back(PaddingFrame{n});
      return;
    }
    if (type == kPing) {
      out_.frames.emplace_back(PingFrame{});
      return;
    }
    if (type == kAck || type == kAckEcn) {
      AckFrame ack;
      ack.largest_acked = varint();
      ack.ack_delay = varint();
      const auto count_at = r_.offset();
      const auto count = varint();
      ack.first_range = varint();
      // Each range needs at least two bytes; reject absurd counts early.
      if (count > r_.remaining() / 2 + 1) {
        throw ParseError(count_at, "ACK range count " + std::to_string(count) +
                                       " exceeds payload");
      }
      for (std::uint64_t i = 0; i < count; ++i) {
        AckRange range;
        range.gap = varint();
        range.length = varint();
        ack.ranges.push_back(range);
      }
      if (type == kAckEcn) {
        EcnCounts ecn;
        ecn.ect0 = varint();
        ecn.ect1 = varint();
        ecn.ce = varint();
        ack.ecn = ecn;
      }
      if (decode_ack_ranges(ack).underflow) {
        out_.anomalies.push_back({AnomalyKind::ack_range_underflow, index, frame_at});
      }
      out_.frames.emplace_back(std::move(ack));
      return;
    }
    if (type == kResetStream) {
      ResetStreamFrame f;
      f.stream_id = varint();
      f.error_code = varint();
      f.final_size = varint();
      out_.frames.emplace_back(f);
      return;
    }
    if (type == kStopSending) {
      StopSendingFrame f;
      f.stream_id = varint();
      f.error_code = varint();
      out_.frames.emplace_back(f);
      return;
    }
    if (type == kCrypto) {
      CryptoFrame f;
      f.offset = varint();
      f.data = bytes_with_length();
      out_.frames.emplace_back(std::move(f));
      return;
    }
    if (type == kNewToken) {
      out_.frames.emplace_back(NewTokenFrame{bytes_with_length()});
      return;
    }
    if (type >= kStream && type <= kStream + 7) {
      StreamFrame f;
      f.stream_id = varint();
      if (type & 0x04) f.offset = varint();
      if (type & 0x02) {
        f.data = bytes_with_length();
      } else {
        auto rest = r_.rest();
        f.data.assign(rest.begin(), rest.end());
      }
      f.fin = (type & 0x01) != 0;
      if (f.empty_non_fin()) {
        out_.anomalies.push_back({AnomalyKind::empty_stream_frame, index, frame_at});
      }
      out_.frames.emplace_back(std::move(f));
      return;
    }
    if (type == kMaxData) {
      out_.frames.emplace_back(MaxDataFrame{varint()});
      return;
    }
    if (type == kMaxStreamData) {
      MaxStreamDataFrame f;
      f.stream_id = varint();
      f.maximum = varint();
      out_.frames.emplace_back(f);
      return;
    }
    if (type == kMaxStreamsBidi || type == kMaxStreamsUni) {
      out_.frames.emplace_back(MaxStreamsFrame{type == kMaxStreamsBidi, varint()});
      return;
    }
    if (type == kDataBlocked) {
      out_.frames.emplace_back(DataBlockedFrame{varint()});
      return;
    }
    if (type == kStreamDataBlocked) {
      StreamDataBlockedFrame f;
      f.stream_id = varint();
      f.limit = varint();
      out_.frames.emplace_back(f);
      return;
    }
    if (type == kStreamsBlockedBidi || type == kStreamsBlockedUni) {
      out_.frames.emplace_back(
          StreamsBlockedFrame{type == kStreamsBlockedBidi, varint()});
      return;
    }
    if (type == kNewConnectionId) {
      NewConnectionIdFrame f;
      f.sequence = varint();
      f.retire_prior_to = varint();
      const auto len_at = r_.offset();
      const auto len = r_.read_u8();
      if (len < 1 || len > kMaxConnectionIdLength) {
        throw ParseError(len_at, "NEW_CONNECTION_ID length " + std::to_string(len) +
                                     " out of range");
      }
      f.cid = ConnectionId(r_.read_span(len));
      f.reset_token = fixed<16>();
      out_.frames.emplace_back(std::move(f));
      return;
    }
    if (type == kRetireConnectionId) {
      out_.frames.emplace_back(RetireConnectionIdFrame{varint()});
      return;
    }
    if (type == kPathChallenge) {
      out_.frames.emplace_back(PathChallengeFrame{fixed<8>()});
      return;
    }
    if (type == kPathResponse) {
      out_.frames.emplace_back(PathResponseFrame{fixed<8>()});
      return;
    }
    if (type == kConnectionClose || type == kConnectionCloseApp) {
      ConnectionCloseFrame f;
      f.application = type == kConnectionCloseApp;
      f.error_code = varint();
      if (!f.application) f.frame_type = varint();
      auto reason = bytes_with_length();
      f.reason.assign(reason.begin(), reason.end());
      out_.frames.emplace_back(std::move(f));
      return;
    }
    if (type == kHandshakeDone) {
      out_.frames.emplace_back(HandshakeDoneFrame{});
      return;
    }
    throw ParseError(frame_at, "unknown frame type 0x" +
                                   to_hex(as_span(encode_varint(type))));
  }

 private:
  ByteReader r_;
  ParsedFrames& out_;
};

}  // namespace

ParsedFrames parse_frames(ByteSpan payload, std::size_t base_offset) {
  ParsedFrames out;
  FrameReader reader(payload, base_offset, out);
  while (!reader.done()) reader.parse_one();
  return out;
}

void serialize_frame(ByteWriter& w, const Frame& frame,
                     const SerializeOptions& opts) {
  using namespace frame_type;
  std::visit(
      overloaded{
          [&](const PaddingFrame& f) {
            if (f.length == 0) throw std::invalid_argument("PADDING of length 0");
            w.zeros(static_cast<std::size_t>(f.length));
          },
          [&](const PingFrame&) { w.varint(kPing); },
          [&](const AckFrame& f) {
            w.varint(f.ecn ? kAckEcn : kAck);
            w.varint(f.largest_acked);
            w.varint(f.ack_delay);
            w.varint(f.ranges.size());
            w.varint(f.first_range);
            for (const auto& r : f.ranges) {
              w.varint(r.gap);
              w.varint(r.length);
            }
            if (f.ecn) {
              w.varint(f.ecn->ect0);
              w.varint(f.ecn->ect1);
              w.varint(f.ecn->ce);
            }
          },
          [&](const ResetStreamFrame& f) {
            w.varint(kResetStream);
            w.varint(f.stream_id);
            w.varint(f.error_code);
            w.varint(f.final_size);
          },
          [&](const StopSendingFrame& f) {
            w.varint(kStopSending);
            w.varint(f.stream_id);
            w.varint(f.error_code);
          },
          [&](const CryptoFrame& f) {
            w.varint(kCrypto);
            w.varint(f.offset);
            w.varint(f.data.size());
            w.bytes(as_span(f.data));
          },
          [&](const NewTokenFrame& f) {
            w.varint(kNewToken);
            w.varint(f.token.size());
            w.bytes(as_span(f.token));
          },
          [&](const StreamFrame& f) {
            if (f.empty_non_fin() && !opts.allow_empty_stream_frames) {
              throw std::invalid_argument(
                  "refusing to serialize an empty non-fin STREAM frame");
            }
            std::uint64_t type = kStream | 0x02;
            if (f.offset != 0) type |= 0x04;
            if (f.fin) type |= 0x01;
            w.varint(type);
            w.varint(f.stream_id);
            if (f.offset != 0) w.varint(f.offset);
            w.varint(f.data.size());
            w.bytes(as_span(f.data));
          },
          [&](const MaxDataFrame& f) {
            w.varint(kMaxData);
            w.varint(f.maximum);
          },
          [&](const MaxStreamDataFrame& f) {
            w.varint(kMaxStreamData);
            w.varint(f.stream_id);
            w.varint(f.maximum);
          },
          [&](const MaxStreamsFrame& f) {
            w.varint(f.bidirectional ? kMaxStreamsBidi : kMaxStreamsUni);
            w.varint(f.maximum);
          },
          [&](const DataBlockedFrame& f) {
            w.varint(kDataBlocked);
            w.varint(f.limit);
          },
          [&](const StreamDataBlockedFrame& f) {
            w.varint(kStreamDataBlocked);
            w.varint(f.stream_id);
            w.varint(f.limit);
          },
          [&](const StreamsBlockedFrame& f) {
            w.varint(f.bidirectional ? kStreamsBlockedBidi : kStreamsBlockedUni);
            w.varint(f.limit);
          },
          [&](const NewConnectionIdFrame& f) {
            if (f.cid.empty()) {
              throw std::invalid_argument("NEW_CONNECTION_ID with empty cid");
            }
            w.varint(kNewConnectionId);
            w.varint(f.sequence);
            w.varint(f.retire_prior_to);
            w.u8(static_cast<std::uint8_t>(f.cid.size()));
            w.bytes(f.cid.span());
            w.bytes(f.reset_token);
          },
          [&](const RetireConnectionIdFrame& f) {
            w.varint(kRetireConnectionId);
            w.varint(f.sequence);
          },
          [&](const PathChallengeFrame& f) {
            w.varint(kPathChallenge);
            w.bytes(f.data);
          },
          [&](const PathResponseFrame& f) {
            w.varint(kPathResponse);
            w.bytes(f.data);
          },
          [&](const ConnectionCloseFrame& f) {
            w.varint(f.application ? kConnectionCloseApp : kConnectionClose);
            w.varint(f.error_code);
            if (!f.application) w.varint(f.frame_type);
            w.varint(f.reason.size());
            w.bytes(ByteSpan(reinterpret_cast<const std::uint8_t*>(f.reason.data()),
                             f.reason.size()));
          },
          [&](const HandshakeDoneFrame&) { w.varint(kHandshakeDone); },
      },
      frame);
}

Bytes serialize_frames(const std::vector<Frame>& frames,
                       const SerializeOptions& opts) {
  if (frames.empty()) {
    throw std::invalid_argument("a packet payload must carry at least one frame");
  }
  ByteWriter w;
  for (const auto& f : frames) serialize_frame(w, f, opts);
  return w.take();
}

std::size_t serialized_size(const Frame& f) {
  ByteWriter w;
  serialize_frame(w, f, SerializeOptions{true});
  return w.size();
}

}  // namespace qtracker::wire
