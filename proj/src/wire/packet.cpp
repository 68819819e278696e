#include "qtracker/wire/packet.hpp"

namespace qtracker::wire {

CleartextPacket parse_cleartext_packet(ByteSpan bytes,
                                       const HeaderParseContext& ctx) {
  CleartextPacket out;
  auto parsed = parse_header(bytes, ctx);
  out.header = std::move(parsed.header);
  if (out.header.type == PacketType::version_negotiation ||
      out.header.type == PacketType::retry) {
    return out;
  }
  out.payload = parse_frames(
      bytes.subspan(parsed.payload_offset, parsed.packet_end - parsed.payload_offset),
      parsed.payload_offset);
  return out;
}

Bytes serialize_cleartext_packet(const PacketHeader& header,
                                 const std::vector<Frame>& frames,
                                 const SerializeOptions& opts) {
  Bytes out = serialize_header(header);
  if (header.type == PacketType::version_negotiation ||
      header.type == PacketType::retry) {
    return out;
  }
  Bytes payload = serialize_frames(frames, opts);
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

}  // namespace qtracker::wire
