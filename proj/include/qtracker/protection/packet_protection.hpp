#pragma once

#include <optional>
#include <stdexcept>

#include "qtracker/protection/keys.hpp"
#include "qtracker/wire/header.hpp"

namespace qtracker::protection {

class DecryptError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Protects one packet. `header.packet_number` is the full packet number and is
/// truncated to `header.pn_length` bytes; the long-header Length is filled in.
/// Payloads too short for a header protection sample are padded with PADDING.
Bytes protect(wire::PacketHeader header, ByteSpan plaintext, const KeyMaterial& keys);

struct ProtectedPacket {
  Bytes datagram;
  /// Header as serialized before protection (Length filled in).
  Bytes cleartext_header;
  /// Payload after sample padding.
  Bytes plaintext;

  Bytes cleartext() const;
};

ProtectedPacket protect_packet(wire::PacketHeader header, ByteSpan plaintext,
                               const KeyMaterial& keys);

/// Bytes added by protection and the header, for sizing payloads.
inline constexpr std::size_t kAeadOverhead = 16;

struct UnprotectedPacket {
  /// Header with the packet number reconstructed against `largest_pn`.
  wire::PacketHeader header;
  Bytes plaintext;
  /// Header bytes with protection removed (packet number truncated as sent).
  Bytes cleartext_header;
  /// Bytes of the datagram occupied by this packet.
  std::size_t consumed = 0;

  Bytes cleartext() const;
};

/// Removes header and payload protection from the first packet in `datagram`.
/// Throws DecryptError on authentication failure or when the packet is too
/// short to sample, ParseError on a malformed header.
UnprotectedPacket unprotect(ByteSpan datagram, const KeyMaterial& keys,
                            std::optional<std::uint64_t> largest_pn = std::nullopt,
                            std::size_t short_dcid_length = 8);

}  // namespace qtracker::protection
