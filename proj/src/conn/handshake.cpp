#include "qtracker/conn/handshake.hpp"

namespace qtracker::conn {

std::string_view to_string(HandshakeStage s) {
  switch (s) {
    case HandshakeStage::succeeded: return "succeeded";
    case HandshakeStage::unreachable: return "unreachable";
    case HandshakeStage::no_response: return "no_response";
    case HandshakeStage::version_mismatch: return "version_mismatch";
    case HandshakeStage::handshake_incomplete: return "handshake_incomplete";
    case HandshakeStage::keys_unavailable: return "keys_unavailable";
  }
  return "?";
}

HandshakeOutcome classify_handshake(const Connection& conn) {
  if (conn.handshake_complete()) return {HandshakeStage::succeeded};
  if (conn.transport().unreachable()) return {HandshakeStage::unreachable};
  if (conn.progress().version_negotiation) return {HandshakeStage::version_mismatch};
  if (conn.datagrams_received == 0) return {HandshakeStage::no_response};
  if (conn.provider().handshake_complete()) return {HandshakeStage::keys_unavailable};
  return {HandshakeStage::handshake_incomplete};
}

HandshakeOutcome perform_handshake(Connection& conn, TimePoint deadline) {
  conn.start();
  conn.run_until(
      [&] {
        return conn.handshake_complete() || conn.closed() || conn.transport().unreachable() ||
               conn.progress().version_negotiation || conn.progress().tls_error.has_value();
      },
      deadline);
  return classify_handshake(conn);
}

}  // namespace qtracker::conn
