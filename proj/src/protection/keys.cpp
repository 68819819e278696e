#include "qtracker/protection/keys.hpp"

#include <sstream>

#include "qtracker/protection/crypto.hpp"

namespace qtracker::protection {

namespace {

constexpr std::uint8_t kInitialSaltV1[] = {0x38, 0x76, 0x2c, 0xf7, 0xf5, 0x59, 0x34,
                                           0xb3, 0x4d, 0x17, 0x9a, 0xe6, 0xa4, 0xc8,
                                           0x0c, 0xad, 0xcc, 0xbb, 0x7f, 0x0a};

std::string version_message(std::uint32_t version) {
  std::ostringstream os;
  os << "unsupported QUIC version 0x" << std::hex << version;
  return os.str();
}

}  // namespace

std::string_view to_string(EncryptionLevel level) {
  switch (level) {
    case EncryptionLevel::initial: return "initial";
    case EncryptionLevel::handshake: return "handshake";
    case EncryptionLevel::one_rtt: return "one_rtt";
    case EncryptionLevel::zero_rtt: return "zero_rtt";
  }
  return "?";
}

std::optional<EncryptionLevel> level_from_string(std::string_view s) {
  for (auto l : {EncryptionLevel::initial, EncryptionLevel::handshake,
                 EncryptionLevel::one_rtt, EncryptionLevel::zero_rtt}) {
    if (to_string(l) == s) return l;
  }
  return std::nullopt;
}

std::optional<EncryptionLevel> level_of(wire::PacketType type) {
  switch (type) {
    case wire::PacketType::initial: return EncryptionLevel::initial;
    case wire::PacketType::handshake: return EncryptionLevel::handshake;
    case wire::PacketType::zero_rtt: return EncryptionLevel::zero_rtt;
    case wire::PacketType::one_rtt: return EncryptionLevel::one_rtt;
    default: return std::nullopt;
  }
}

wire::PacketType packet_type_of(EncryptionLevel level) {
  switch (level) {
    case EncryptionLevel::initial: return wire::PacketType::initial;
    case EncryptionLevel::handshake: return wire::PacketType::handshake;
    case EncryptionLevel::zero_rtt: return wire::PacketType::zero_rtt;
    case EncryptionLevel::one_rtt: break;
  }
  return wire::PacketType::one_rtt;
}

UnsupportedVersion::UnsupportedVersion(std::uint32_t version)
    : std::invalid_argument(version_message(version)), version_(version) {}

KeyMaterial key_material_from_secret(EncryptionLevel level, Direction direction,
                                     ByteSpan secret) {
  KeyMaterial km;
  km.level = level;
  km.direction = direction;
  km.key = crypto::hkdf_expand_label(secret, "quic key", {}, 16);
  km.iv = crypto::hkdf_expand_label(secret, "quic iv", {}, 12);
  km.hp = crypto::hkdf_expand_label(secret, "quic hp", {}, 16);
  return km;
}

std::pair<KeyMaterial, KeyMaterial> derive_initial_keys(const wire::ConnectionId& dcid,
                                                        std::uint32_t version) {
  if (version != wire::kQuicVersion1) throw UnsupportedVersion(version);
  if (dcid.empty()) throw std::invalid_argument("initial keys need a non-empty dcid");
  const auto initial = crypto::hkdf_extract(kInitialSaltV1, dcid.span());
  const auto client = crypto::hkdf_expand_label(wire::as_span(initial), "client in", {}, 32);
  const auto server = crypto::hkdf_expand_label(wire::as_span(initial), "server in", {}, 32);
  return {key_material_from_secret(EncryptionLevel::initial, Direction::client,
                                   wire::as_span(client)),
          key_material_from_secret(EncryptionLevel::initial, Direction::server,
                                   wire::as_span(server))};
}

}  // namespace qtracker::protection
