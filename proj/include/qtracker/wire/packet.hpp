#pragma once

#include "qtracker/wire/frames.hpp"
#include "qtracker/wire/header.hpp"

namespace qtracker::wire {

/// A packet as logged in traces: header with the packet number in the clear
/// followed by the decrypted payload. Version negotiation and retry packets
/// carry no frames.
struct CleartextPacket {
  PacketHeader header;
  ParsedFrames payload;
};

CleartextPacket parse_cleartext_packet(ByteSpan bytes,
                                       const HeaderParseContext& ctx = {});

Bytes serialize_cleartext_packet(const PacketHeader& header,
                                 const std::vector<Frame>& frames,
                                 const SerializeOptions& opts = {});

}  // namespace qtracker::wire
