#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "qtracker/wire/bytes.hpp"
#include "qtracker/wire/header.hpp"

namespace qtracker::wire {

namespace frame_type {
inline constexpr std::uint64_t kPadding = 0x00;
inline constexpr std::uint64_t kPing = 0x01;
inline constexpr std::uint64_t kAck = 0x02;
inline constexpr std::uint64_t kAckEcn = 0x03;
inline constexpr std::uint64_t kResetStream = 0x04;
inline constexpr std::uint64_t kStopSending = 0x05;
inline constexpr std::uint64_t kCrypto = 0x06;
inline constexpr std::uint64_t kNewToken = 0x07;
inline constexpr std::uint64_t kStream = 0x08;  // 0x08..0x0f
inline constexpr std::uint64_t kMaxData = 0x10;
inline constexpr std::uint64_t kMaxStreamData = 0x11;
inline constexpr std::uint64_t kMaxStreamsBidi = 0x12;
inline constexpr std::uint64_t kMaxStreamsUni = 0x13;
inline constexpr std::uint64_t kDataBlocked = 0x14;
inline constexpr std::uint64_t kStreamDataBlocked = 0x15;
inline constexpr std::uint64_t kStreamsBlockedBidi = 0x16;
inline constexpr std::uint64_t kStreamsBlockedUni = 0x17;
inline constexpr std::uint64_t kNewConnectionId = 0x18;
inline constexpr std::uint64_t kRetireConnectionId = 0x19;
inline constexpr std::uint64_t kPathChallenge = 0x1a;
inline constexpr std::uint64_t kPathResponse = 0x1b;
inline constexpr std::uint64_t kConnectionClose = 0x1c;
inline constexpr std::uint64_t kConnectionCloseApp = 0x1d;
inline constexpr std::uint64_t kHandshakeDone = 0x1e;
}  // namespace frame_type

struct PaddingFrame {
  std::uint64_t length = 1;
  bool operator==(const PaddingFrame&) const = default;
};

struct PingFrame {
  bool operator==(const PingFrame&) const = default;
};

struct AckRange {
  std::uint64_t gap = 0;
  std::uint64_t length = 0;
  bool operator==(const AckRange&) const = default;
};

struct EcnCounts {
  std::uint64_t ect0 = 0;
  std::uint64_t ect1 = 0;
  std::uint64_t ce = 0;
  bool operator==(const EcnCounts&) const = default;
};

/// Inclusive packet-number interval.
struct PacketRange {
  std::uint64_t smallest = 0;
  std::uint64_t largest = 0;
  bool operator==(const PacketRange&) const = default;
};

struct AckFrame {
  std::uint64_t largest_acked = 0;
  std::uint64_t ack_delay = 0;
  std::uint64_t first_range = 0;
  std::vector<AckRange> ranges;
  std::optional<EcnCounts> ecn;

  bool operator==(const AckFrame&) const = default;
};

struct AckRangeDecode {
  /// Strictly descending, non-overlapping; truncated at the first range that
  /// would fall below packet number zero.
  std::vector<PacketRange> ranges;
  bool underflow = false;
};

AckRangeDecode decode_ack_ranges(const AckFrame& ack);

/// Builds an ACK frame covering `ranges`, which must be strictly descending
/// and non-overlapping.
AckFrame make_ack_frame(const std::vector<PacketRange>& ranges,
                        std::uint64_t ack_delay = 0);

struct ResetStreamFrame {
  std::uint64_t stream_id = 0;
  std::uint64_t error_code = 0;
  std::uint64_t final_size = 0;
  bool operator==(const ResetStreamFrame&) const = default;
};

struct StopSendingFrame {
  std::uint64_t stream_id = 0;
  std::uint64_t error_code = 0;
  bool operator==(const StopSendingFrame&) const = default;
};

struct CryptoFrame {
  std::uint64_t offset = 0;
  Bytes data;
  bool operator==(const CryptoFrame&) const = default;
};

struct NewTokenFrame {
  Bytes token;
  bool operator==(const NewTokenFrame&) const = default;
};

struct StreamFrame {
  std::uint64_t stream_id = 0;
  std::uint64_t offset = 0;
  Bytes data;
  bool fin = false;

  /// The misbehavior a conformance run must be able to observe.
  bool empty_non_fin() const { return data.empty() && !fin; }
  bool operator==(const StreamFrame&) const = default;
};

struct MaxDataFrame {
  std::uint64_t maximum = 0;
  bool operator==(const MaxDataFrame&) const = default;
};

struct MaxStreamDataFrame {
  std::uint64_t stream_id = 0;
  std::uint64_t maximum = 0;
  bool operator==(const MaxStreamDataFrame&) const = default;
};

struct MaxStreamsFrame {
  bool bidirectional = true;
  std::uint64_t maximum = 0;
  bool operator==(const MaxStreamsFrame&) const = default;
};

struct DataBlockedFrame {
  std::uint64_t limit = 0;
  bool operator==(const DataBlockedFrame&) const = default;
};

struct StreamDataBlockedFrame {
  std::uint64_t stream_id = 0;
  std::uint64_t limit = 0;
  bool operator==(const StreamDataBlockedFrame&) const = default;
};

struct StreamsBlockedFrame {
  bool bidirectional = true;
  std::uint64_t limit = 0;
  bool operator==(const StreamsBlockedFrame&) const = default;
};

struct NewConnectionIdFrame {
  std::uint64_t sequence = 0;
  std::uint64_t retire_prior_to = 0;
  ConnectionId cid;
  std::array<std::uint8_t, 16> reset_token{};
  bool operator==(const NewConnectionIdFrame&) const = default;
};

struct RetireConnectionIdFrame {
  std::uint64_t sequence = 0;
  bool operator==(const RetireConnectionIdFrame&) const = default;
};

struct PathChallengeFrame {
  std::array<std::uint8_t, 8> data{};
  bool operator==(const PathChallengeFrame&) const = default;
};

struct PathResponseFrame {
  std::array<std::uint8_t, 8> data{};
  bool operator==(const PathResponseFrame&) const = default;
};

struct ConnectionCloseFrame {
  bool application = false;
  std::uint64_t error_code = 0;
  std::uint64_t frame_type = 0;  // transport variant only
  std::string reason;
  bool operator==(const ConnectionCloseFrame&) const = default;
};

struct HandshakeDoneFrame {
  bool operator==(const HandshakeDoneFrame&) const = default;
};

using Frame =
    std::variant<PaddingFrame, PingFrame, AckFrame, ResetStreamFrame,
                 StopSendingFrame, CryptoFrame, NewTokenFrame, StreamFrame,
                 MaxDataFrame, MaxStreamDataFrame, MaxStreamsFrame,
                 DataBlockedFrame, StreamDataBlockedFrame, StreamsBlockedFrame,
                 NewConnectionIdFrame, RetireConnectionIdFrame,
                 PathChallengeFrame, PathResponseFrame, ConnectionCloseFrame,
                 HandshakeDoneFrame>;

std::string frame_name(const Frame& f);

/// Anything but PADDING, ACK and CONNECTION_CLOSE.
bool is_ack_eliciting(const Frame& f);
bool is_ack_eliciting(const std::vector<Frame>& frames);

enum class AnomalyKind {
  empty_stream_frame,
  ack_range_underflow,
  non_minimal_varint,
};

std::string_view to_string(AnomalyKind kind);

struct FrameAnomaly {
  AnomalyKind kind;
  std::size_t frame_index = 0;
  std::size_t offset = 0;
  bool operator==(const FrameAnomaly&) const = default;
};

struct ParsedFrames {
  std::vector<Frame> frames;
  std::vector<FrameAnomaly> anomalies;

  bool has(AnomalyKind kind) const;
};

/// Consumes the whole payload. PADDING runs coalesce into one frame; flagged
/// conditions are reported in `anomalies` instead of failing the parse.
/// Unknown frame types and truncation throw ParseError.
ParsedFrames parse_frames(ByteSpan payload, std::size_t base_offset = 0);

struct SerializeOptions {
  /// Only the fault-injection server turns this on.
  bool allow_empty_stream_frames = false;
};

void serialize_frame(ByteWriter& w, const Frame& f,
                     const SerializeOptions& opts = {});

/// Throws std::invalid_argument on an empty list or an empty non-fin STREAM
/// frame.
Bytes serialize_frames(const std::vector<Frame>& frames,
                       const SerializeOptions& opts = {});

std::size_t serialized_size(const Frame& f);

}  // namespace qtracker::wire
