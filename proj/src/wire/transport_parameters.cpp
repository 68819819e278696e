#include "qtracker/wire/transport_parameters.hpp"

#include <algorithm>

#include "qtracker/wire/varint.hpp"

namespace qtracker::wire {

const Bytes* TransportParameters::find(std::uint64_t id) const {
  auto it = std::find_if(entries_.begin(), entries_.end(),
                         [id](const Entry& e) { return e.id == id; });
  return it == entries_.end() ? nullptr : &it->value;
}

void TransportParameters::set_raw(std::uint64_t id, Bytes value) {
  for (auto& e : entries_) {
    if (e.id == id) {
      e.value = std::move(value);
      return;
    }
  }
  entries_.push_back({id, std::move(value)});
}

void TransportParameters::set_integer(std::uint64_t id, std::uint64_t value) {
  set_raw(id, encode_varint(value));
}

std::optional<std::uint64_t> TransportParameters::integer(std::uint64_t id) const {
  const Bytes* raw = find(id);
  if (!raw || raw->empty()) return std::nullopt;
  try {
    auto d = decode_varint(as_span(*raw));
    if (d.consumed != raw->size()) return std::nullopt;
    return d.value;
  } catch (const ParseError&) {
    return std::nullopt;
  }
}

std::optional<ConnectionId> TransportParameters::original_dcid() const {
  const Bytes* raw = find(tp_id::kOriginalDestinationConnectionId);
  if (!raw || raw->size() > kMaxConnectionIdLength) return std::nullopt;
  return ConnectionId(*raw);
}

std::optional<ConnectionId> TransportParameters::initial_scid() const {
  const Bytes* raw = find(tp_id::kInitialSourceConnectionId);
  if (!raw || raw->size() > kMaxConnectionIdLength) return std::nullopt;
  return ConnectionId(*raw);
}

std::string transport_parameter_name(std::uint64_t id) {
  switch (id) {
    case tp_id::kOriginalDestinationConnectionId:
      return "original_destination_connection_id";
    case tp_id::kMaxIdleTimeout: return "max_idle_timeout";
    case tp_id::kStatelessResetToken: return "stateless_reset_token";
    case tp_id::kMaxUdpPayloadSize: return "max_udp_payload_size";
    case tp_id::kInitialMaxData: return "initial_max_data";
    case tp_id::kInitialMaxStreamDataBidiLocal:
      return "initial_max_stream_data_bidi_local";
    case tp_id::kInitialMaxStreamDataBidiRemote:
      return "initial_max_stream_data_bidi_remote";
    case tp_id::kInitialMaxStreamDataUni: return "initial_max_stream_data_uni";
    case tp_id::kInitialMaxStreamsBidi: return "initial_max_streams_bidi";
    case tp_id::kInitialMaxStreamsUni: return "initial_max_streams_uni";
    case tp_id::kAckDelayExponent: return "ack_delay_exponent";
    case tp_id::kMaxAckDelay: return "max_ack_delay";
    case tp_id::kDisableActiveMigration: return "disable_active_migration";
    case tp_id::kPreferredAddress: return "preferred_address";
    case tp_id::kActiveConnectionIdLimit: return "active_connection_id_limit";
    case tp_id::kInitialSourceConnectionId: return "initial_source_connection_id";
    case tp_id::kRetrySourceConnectionId: return "retry_source_connection_id";
    default: return "unknown";
  }
}

Bytes encode_transport_parameter(std::uint64_t id, ByteSpan value) {
  ByteWriter w;
  w.varint(id);
  w.varint(value.size());
  w.bytes(value);
  return w.take();
}

Bytes encode_transport_parameters(const TransportParameters& tp) {
  ByteWriter w;
  for (const auto& e : tp.entries()) w.bytes(encode_transport_parameter(e.id, as_span(e.value)));
  return w.take();
}

namespace {

template <class OnEntry>
void walk(ByteSpan data, OnEntry&& on_entry) {
  ByteReader r(data);
  while (!r.empty()) {
    const auto at = r.offset();
    const auto id = r.read_varint();
    const auto len_at = r.offset();
    const auto len = r.read_varint();
    if (len > r.remaining()) {
      throw ParseError(len_at, "transport parameter length " + std::to_string(len) +
                                   " exceeds remaining " +
                                   std::to_string(r.remaining()) + " bytes");
    }
    on_entry(at, id, r.read_bytes(static_cast<std::size_t>(len)));
  }
}

}  // namespace

TransportParameters decode_transport_parameters(ByteSpan data) {
  TransportParameters tp;
  walk(data, [&](std::size_t at, std::uint64_t id, Bytes value) {
    if (tp.contains(id)) {
      throw ParseError(at, "duplicate transport parameter 0x" +
                               to_hex(as_span(encode_varint(id))));
    }
    tp.set_raw(id, std::move(value));
  });
  return tp;
}

LenientTransportParameters decode_transport_parameters_lenient(ByteSpan data) {
  LenientTransportParameters out;
  walk(data, [&](std::size_t, std::uint64_t id, Bytes value) {
    if (out.parameters.contains(id)) {
      out.duplicate_ids.push_back(id);
      return;
    }
    out.parameters.set_raw(id, std::move(value));
  });
  return out;
}

}  // namespace qtracker::wire
