#pragma once

#include "qtracker/conn/connection.hpp"

namespace qtracker::conn {

enum class HandshakeStage : std::uint8_t {
  succeeded,
  unreachable,
  no_response,
  version_mismatch,
  handshake_incomplete,
  keys_unavailable,
};

std::string_view to_string(HandshakeStage s);

struct HandshakeOutcome {
  HandshakeStage stage = HandshakeStage::no_response;
  bool succeeded() const { return stage == HandshakeStage::succeeded; }
};

/// Starts the connection if needed and drives it until 1-RTT keys exist in
/// both directions, or until `deadline`. Failure reports the stage reached.
HandshakeOutcome perform_handshake(Connection& conn, TimePoint deadline);
HandshakeOutcome classify_handshake(const Connection& conn);

}  // namespace qtracker::conn
