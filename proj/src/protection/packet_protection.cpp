#include "qtracker/protection/packet_protection.hpp"

#include "qtracker/protection/crypto.hpp"
#include "qtracker/wire/varint.hpp"

namespace qtracker::protection {

namespace {

constexpr std::size_t kSampleLength = 16;

Bytes nonce_for(const KeyMaterial& keys, std::uint64_t pn) {
  Bytes nonce = keys.iv;
  for (std::size_t i = 0; i < 8; ++i) {
    nonce[nonce.size() - 1 - i] ^= static_cast<std::uint8_t>(pn >> (8 * i));
  }
  return nonce;
}

std::uint8_t first_byte_mask(std::uint8_t first) {
  return (first & 0x80) ? 0x0f : 0x1f;
}

}  // namespace

Bytes UnprotectedPacket::cleartext() const {
  Bytes out = cleartext_header;
  out.insert(out.end(), plaintext.begin(), plaintext.end());
  return out;
}

Bytes ProtectedPacket::cleartext() const {
  Bytes out = cleartext_header;
  out.insert(out.end(), plaintext.begin(), plaintext.end());
  return out;
}

Bytes protect(wire::PacketHeader header, ByteSpan plaintext, const KeyMaterial& keys) {
  return protect_packet(std::move(header), plaintext, keys).datagram;
}

ProtectedPacket protect_packet(wire::PacketHeader header, ByteSpan plaintext,
                               const KeyMaterial& keys) {
  if (header.type == wire::PacketType::version_negotiation ||
      header.type == wire::PacketType::retry) {
    throw std::invalid_argument("version negotiation and retry packets are not protected");
  }
  Bytes payload(plaintext.begin(), plaintext.end());
  // The sample starts 4 bytes after the packet number.
  if (header.pn_length + payload.size() < 4) payload.resize(4 - header.pn_length, 0);

  const std::uint64_t full_pn = header.packet_number;
  if (header.is_long()) {
    header.length = header.pn_length + payload.size() + crypto::kAeadTagLength;
    if (header.length_size != 0 && wire::varint_size(header.length) > header.length_size) {
      header.length_size = 0;
    }
  }
  const Bytes hdr = serialize_header(header);
  const std::size_t pn_offset = hdr.size() - header.pn_length;

  Bytes out = hdr;
  const auto sealed = crypto::aes128_gcm_seal(wire::as_span(keys.key),
                                              wire::as_span(nonce_for(keys, full_pn)),
                                              wire::as_span(hdr), wire::as_span(payload));
  out.insert(out.end(), sealed.begin(), sealed.end());

  const auto mask = crypto::aes128_ecb_block(
      wire::as_span(keys.hp), ByteSpan(out).subspan(pn_offset + 4, kSampleLength));
  out[0] ^= mask[0] & first_byte_mask(out[0]);
  for (std::size_t i = 0; i < header.pn_length; ++i) out[pn_offset + i] ^= mask[1 + i];
  return {std::move(out), hdr, std::move(payload)};
}

UnprotectedPacket unprotect(ByteSpan datagram, const KeyMaterial& keys,
                            std::optional<std::uint64_t> largest_pn,
                            std::size_t short_dcid_length) {
  wire::HeaderParseContext ctx;
  ctx.short_dcid_length = short_dcid_length;
  const auto prefix = wire::parse_header_prefix(datagram, ctx);
  if (prefix.header.type == wire::PacketType::version_negotiation ||
      prefix.header.type == wire::PacketType::retry) {
    throw std::invalid_argument("version negotiation and retry packets are not protected");
  }
  const std::size_t pn_offset = prefix.pn_offset;
  const std::size_t end = prefix.packet_end;
  if (end < pn_offset + 4 + kSampleLength) {
    throw DecryptError("packet too short for header protection sample");
  }

  Bytes packet(datagram.begin(), datagram.begin() + end);
  const auto mask = crypto::aes128_ecb_block(
      wire::as_span(keys.hp), ByteSpan(packet).subspan(pn_offset + 4, kSampleLength));
  packet[0] ^= mask[0] & first_byte_mask(packet[0]);
  const std::size_t pn_length = (packet[0] & 0x03) + 1;
  std::uint64_t truncated = 0;
  for (std::size_t i = 0; i < pn_length; ++i) {
    packet[pn_offset + i] ^= mask[1 + i];
    truncated = (truncated << 8) | packet[pn_offset + i];
  }
  const std::uint64_t full_pn =
      largest_pn ? wire::decode_packet_number(*largest_pn, truncated, pn_length * 8)
                 : truncated;

  const std::size_t header_end = pn_offset + pn_length;
  const ByteSpan aad = ByteSpan(packet).first(header_end);
  auto plaintext = crypto::aes128_gcm_open(wire::as_span(keys.key),
                                           wire::as_span(nonce_for(keys, full_pn)), aad,
                                           ByteSpan(packet).subspan(header_end, end - header_end));
  if (!plaintext) {
    throw DecryptError(std::string("AEAD authentication failed at level ") +
                       std::string(to_string(keys.level)));
  }

  UnprotectedPacket result;
  result.cleartext_header.assign(aad.begin(), aad.end());
  result.plaintext = std::move(*plaintext);
  result.consumed = end;
  // The reserved bits are only meaningful after removing protection.
  Bytes reparse = result.cleartext_header;
  reparse.insert(reparse.end(), result.plaintext.begin(), result.plaintext.end());
  ctx.largest_pn = largest_pn;
  result.header = wire::parse_header(wire::as_span(reparse), ctx).header;
  return result;
}

}  // namespace qtracker::protection
