#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qtracker/wire/bytes.hpp"

namespace qtracker::wire {

inline constexpr std::uint32_t kQuicVersion1 = 0x00000001;
inline constexpr std::size_t kMaxConnectionIdLength = 20;

class ConnectionId {
 public:
  ConnectionId() = default;
  explicit ConnectionId(ByteSpan bytes);
  explicit ConnectionId(Bytes bytes);

  std::size_t size() const noexcept { return bytes_.size(); }
  bool empty() const noexcept { return bytes_.empty(); }
  const Bytes& bytes() const noexcept { return bytes_; }
  ByteSpan span() const noexcept { return as_span(bytes_); }
  std::string hex() const { return to_hex(span()); }

  auto operator<=>(const ConnectionId&) const = default;

 private:
  Bytes bytes_;
};

enum class PacketType : std::uint8_t {
  initial,
  zero_rtt,
  handshake,
  retry,
  version_negotiation,
  one_rtt,
};

std::string_view to_string(PacketType type);

inline bool is_long_header(PacketType t) { return t != PacketType::one_rtt; }

/// Every header form in one record; fields irrelevant to `type` stay at their
/// defaults. `packet_number` holds the value as written on the wire (truncated
/// to `pn_length` bytes) unless a reconstruction context was supplied.
struct PacketHeader {
  PacketType type = PacketType::initial;
  std::uint32_t version = kQuicVersion1;
  ConnectionId dcid;
  ConnectionId scid;
  Bytes token;               // initial, retry
  std::uint64_t length = 0;  // initial, zero_rtt, handshake
  std::uint8_t length_size = 2;
  std::uint64_t packet_number = 0;
  std::uint8_t pn_length = 1;
  bool spin_bit = false;  // short header
  bool key_phase = false;
  std::vector<std::uint32_t> supported_versions;  // version negotiation
  std::uint8_t unused_bits = 0;  // low 7 bits of a VN first byte
  Bytes retry_integrity_tag;     // retry, not validated

  bool is_long() const { return is_long_header(type); }
  bool operator==(const PacketHeader&) const = default;
};

struct HeaderParseContext {
  std::size_t short_dcid_length = 8;
  /// When set, packet numbers are reconstructed against this value.
  std::optional<std::uint64_t> largest_pn;
};

struct ParsedHeader {
  PacketHeader header;
  std::size_t pn_offset = 0;
  std::size_t payload_offset = 0;
  /// End of this packet inside the buffer (long headers are bounded by their
  /// Length field; everything else runs to the end of the buffer).
  std::size_t packet_end = 0;
};

/// Parses the unprotected header fields up to the packet number. Does not
/// validate the bits covered by header protection.
ParsedHeader parse_header_prefix(ByteSpan buf, const HeaderParseContext& ctx = {});

/// Full cleartext header parse, including reserved-bit checks and the packet
/// number. Throws ParseError carrying the byte offset.
ParsedHeader parse_header(ByteSpan buf, const HeaderParseContext& ctx = {});

/// Serializes `h` exactly; the long-header Length field is written with
/// `length_size` bytes (0 means minimal).
Bytes serialize_header(const PacketHeader& h);

/// Closest-to-expected reconstruction of a truncated packet number.
std::uint64_t decode_packet_number(std::uint64_t largest_pn,
                                   std::uint64_t truncated_pn,
                                   std::size_t pn_nbits);

/// Bytes needed to encode `pn` unambiguously given the peer's largest
/// acknowledged packet.
std::uint8_t packet_number_length(std::uint64_t pn,
                                  std::optional<std::uint64_t> largest_acked);

}  // namespace qtracker::wire
