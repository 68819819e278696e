#include "qtracker/wire/header.hpp"

#include <stdexcept>

#include "qtracker/wire/varint.hpp"

namespace qtracker::wire {

ConnectionId::ConnectionId(ByteSpan bytes) : bytes_(bytes.begin(), bytes.end()) {
  if (bytes_.size() > kMaxConnectionIdLength) {
    throw std::invalid_argument("connection id longer than 20 bytes");
  }
}

ConnectionId::ConnectionId(Bytes bytes) : bytes_(std::move(bytes)) {
  if (bytes_.size() > kMaxConnectionIdLength) {
    throw std::invalid_argument("connection id longer than 20 bytes");
  }
}

std::string_view to_string(PacketType type) {
  switch (type) {
    case PacketType::initial: return "initial";
    case PacketType::zero_rtt: return "0-rtt";
    case PacketType::handshake: return "handshake";
    case PacketType::retry: return "retry";
    case PacketType::version_negotiation: return "version_negotiation";
    case PacketType::one_rtt: return "1-rtt";
  }
  return "unknown";
}

namespace {

ConnectionId read_cid(ByteReader& r) {
  const auto at = r.offset();
  const auto len = r.read_u8();
  if (len > kMaxConnectionIdLength) {
    throw ParseError(at, "connection id length " + std::to_string(len) +
                             " exceeds 20");
  }
  return ConnectionId(r.read_span(len));
}

ParsedHeader parse_prefix(ByteSpan buf, const HeaderParseContext& ctx,
                          bool strict_length) {
  ByteReader r(buf);
  ParsedHeader out;
  PacketHeader& h = out.header;
  const std::uint8_t first = r.read_u8();

  if ((first & 0x80) == 0) {
    h.type = PacketType::one_rtt;
    h.version = 0;
    h.spin_bit = (first & 0x20) != 0;
    h.key_phase = (first & 0x04) != 0;
    h.pn_length = static_cast<std::uint8_t>((first & 0x03) + 1);
    h.dcid = ConnectionId(r.read_span(ctx.short_dcid_length));
    out.pn_offset = r.position();
    out.packet_end = buf.size();
    return out;
  }

  h.version = r.read_u32();
  h.dcid = read_cid(r);
  h.scid = read_cid(r);

  if (h.version == 0) {
    h.type = PacketType::version_negotiation;
    h.unused_bits = first & 0x7f;
    if (r.remaining() % 4 != 0) {
      throw ParseError(r.offset(), "version list length " +
                                       std::to_string(r.remaining()) +
                                       " is not a multiple of 4");
    }
    while (!r.empty()) h.supported_versions.push_back(r.read_u32());
    h.pn_length = 0;
    out.pn_offset = out.payload_offset = out.packet_end = buf.size();
    return out;
  }

  h.type = static_cast<PacketType>((first >> 4) & 0x03);
  if (h.type == PacketType::retry) {
    if (r.remaining() < 16) {
      throw ParseError(r.offset(), "truncated retry integrity tag");
    }
    h.token = r.read_bytes(r.remaining() - 16);
    h.retry_integrity_tag = r.read_bytes(16);
    h.pn_length = 0;
    h.unused_bits = first & 0x0f;
    out.pn_offset = out.payload_offset = out.packet_end = buf.size();
    return out;
  }
  if (h.type == PacketType::initial) {
    const auto token_at = r.offset();
    const auto token_len = r.read_varint();
    if (token_len > r.remaining()) {
      throw ParseError(token_at, "truncated token");
    }
    h.token = r.read_bytes(static_cast<std::size_t>(token_len));
  }
  const auto length_at = r.offset();
  if (r.empty()) throw ParseError(length_at, "truncated length field");
  const auto decoded = decode_varint(buf.subspan(r.position()));
  r.skip(decoded.consumed);
  h.length = decoded.value;
  h.length_size = static_cast<std::uint8_t>(decoded.consumed);
  h.pn_length = static_cast<std::uint8_t>((first & 0x03) + 1);
  out.pn_offset = r.position();
  if (h.length > r.remaining()) {
    if (strict_length) {
      throw ParseError(length_at, "length field " + std::to_string(h.length) +
                                      " exceeds remaining " +
                                      std::to_string(r.remaining()) + " bytes");
    }
    // Cleartext logs drop the AEAD tag that Length still counts.
    out.packet_end = buf.size();
  } else {
    out.packet_end = out.pn_offset + static_cast<std::size_t>(h.length);
  }
  return out;
}

}  // namespace

ParsedHeader parse_header_prefix(ByteSpan buf, const HeaderParseContext& ctx) {
  if (buf.empty()) throw ParseError(0, "empty packet");
  return parse_prefix(buf, ctx, true);
}

ParsedHeader parse_header(ByteSpan buf, const HeaderParseContext& ctx) {
  if (buf.empty()) throw ParseError(0, "empty packet");
  const std::uint8_t first = buf[0];
  const bool is_long = (first & 0x80) != 0;
  if (is_long && buf.size() < 5) {
    throw ParseError(buf.size(), "truncated long header");
  }
  const bool vn = is_long && buf[1] == 0 && buf[2] == 0 && buf[3] == 0 && buf[4] == 0;
  if (!vn) {
    if ((first & 0x40) == 0) throw ParseError(0, "fixed bit is zero");
    const bool retry = is_long && ((first >> 4) & 0x03) == 3;
    const std::uint8_t reserved = is_long ? 0x0c : 0x18;
    if (!retry && (first & reserved) != 0) {
      throw ParseError(0, "reserved header bits set");
    }
  }

  ParsedHeader out = parse_prefix(buf, ctx, false);
  PacketHeader& h = out.header;
  if (h.type == PacketType::version_negotiation || h.type == PacketType::retry) {
    return out;
  }
  ByteReader r(buf.subspan(0, out.packet_end));
  r.skip(out.pn_offset);
  const auto truncated = r.read_uint(h.pn_length);
  h.packet_number =
      ctx.largest_pn
          ? decode_packet_number(*ctx.largest_pn, truncated, h.pn_length * 8u)
          : truncated;
  out.payload_offset = r.position();
  return out;
}

Bytes serialize_header(const PacketHeader& h) {
  ByteWriter w;
  if (h.type == PacketType::one_rtt) {
    if (h.pn_length < 1 || h.pn_length > 4) {
      throw std::invalid_argument("pn_length must be 1..4");
    }
    std::uint8_t first = 0x40 | static_cast<std::uint8_t>(h.pn_length - 1);
    if (h.spin_bit) first |= 0x20;
    if (h.key_phase) first |= 0x04;
    w.u8(first);
    w.bytes(h.dcid.span());
    w.uint(h.packet_number, h.pn_length);
    return w.take();
  }

  auto write_cids = [&] {
    w.u8(static_cast<std::uint8_t>(h.dcid.size()));
    w.bytes(h.dcid.span());
    w.u8(static_cast<std::uint8_t>(h.scid.size()));
    w.bytes(h.scid.span());
  };

  if (h.type == PacketType::version_negotiation) {
    w.u8(0x80 | (h.unused_bits & 0x7f));
    w.u32(0);
    write_cids();
    for (auto v : h.supported_versions) w.u32(v);
    return w.take();
  }

  std::uint8_t first = 0xc0 | static_cast<std::uint8_t>(
                                  static_cast<std::uint8_t>(h.type) << 4);
  if (h.type == PacketType::retry) {
    w.u8(first | (h.unused_bits & 0x0f));
    w.u32(h.version);
    write_cids();
    w.bytes(as_span(h.token));
    w.bytes(as_span(h.retry_integrity_tag));
    return w.take();
  }
  if (h.pn_length < 1 || h.pn_length > 4) {
    throw std::invalid_argument("pn_length must be 1..4");
  }
  w.u8(first | static_cast<std::uint8_t>(h.pn_length - 1));
  w.u32(h.version);
  write_cids();
  if (h.type == PacketType::initial) {
    w.varint(h.token.size());
    w.bytes(as_span(h.token));
  }
  if (h.length_size == 0) {
    w.varint(h.length);
  } else {
    w.varint(h.length, h.length_size);
  }
  w.uint(h.packet_number, h.pn_length);
  return w.take();
}

std::uint64_t decode_packet_number(std::uint64_t largest_pn,
                                   std::uint64_t truncated_pn,
                                   std::size_t pn_nbits) {
  const std::uint64_t expected = largest_pn + 1;
  const std::uint64_t win = std::uint64_t{1} << pn_nbits;
  const std::uint64_t hwin = win / 2;
  const std::uint64_t mask = win - 1;
  const std::uint64_t candidate = (expected & ~mask) | truncated_pn;
  if (candidate + hwin <= expected && candidate < (std::uint64_t{1} << 62) - win) {
    return candidate + win;
  }
  if (candidate > expected + hwin && candidate >= win) {
    return candidate - win;
  }
  return candidate;
}

std::uint8_t packet_number_length(std::uint64_t pn,
                                  std::optional<std::uint64_t> largest_acked) {
  const std::uint64_t unacked =
      largest_acked ? pn - *largest_acked : pn + 1;
  const std::uint64_t range = unacked * 2;
  if (range < (std::uint64_t{1} << 8)) return 1;
  if (range < (std::uint64_t{1} << 16)) return 2;
  if (range < (std::uint64_t{1} << 24)) return 3;
  return 4;
}

}  // namespace qtracker::wire
