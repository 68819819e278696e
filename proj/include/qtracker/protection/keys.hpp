#pragma once

#include <optional>
#include <string_view>
#include <utility>

#include "qtracker/wire/bytes.hpp"
#include "qtracker/wire/header.hpp"

namespace qtracker::protection {

using wire::Bytes;
using wire::ByteSpan;

/// Ordered as the handshake makes them available; zero_rtt is optional and
/// sorts last so that "levels only grow" holds for 1-RTT-only connections.
enum class EncryptionLevel : std::uint8_t { initial, handshake, one_rtt, zero_rtt };
inline constexpr std::size_t kLevelCount = 4;

std::string_view to_string(EncryptionLevel level);
std::optional<EncryptionLevel> level_from_string(std::string_view s);

/// Level implied by a packet type; nullopt for version negotiation and retry.
std::optional<EncryptionLevel> level_of(wire::PacketType type);
wire::PacketType packet_type_of(EncryptionLevel level);

enum class Direction : std::uint8_t { client, server };
inline Direction opposite(Direction d) {
  return d == Direction::client ? Direction::server : Direction::client;
}

struct KeyMaterial {
  EncryptionLevel level = EncryptionLevel::initial;
  Direction direction = Direction::client;
  Bytes key;  // 16
  Bytes iv;   // 12
  Bytes hp;   // 16

  bool operator==(const KeyMaterial&) const = default;
};

class UnsupportedVersion : public std::invalid_argument {
 public:
  explicit UnsupportedVersion(std::uint32_t version);
  std::uint32_t version() const { return version_; }

 private:
  std::uint32_t version_;
};

/// Expands a traffic secret into packet protection keys.
KeyMaterial key_material_from_secret(EncryptionLevel level, Direction direction,
                                     ByteSpan secret);

/// Initial keys for both directions, from the client's first destination
/// connection id.
std::pair<KeyMaterial, KeyMaterial> derive_initial_keys(const wire::ConnectionId& dcid,
                                                        std::uint32_t version);

}  // namespace qtracker::protection
