#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "qtracker/wire/bytes.hpp"
#include "qtracker/wire/header.hpp"

namespace qtracker::wire {

namespace tp_id {
inline constexpr std::uint64_t kOriginalDestinationConnectionId = 0x00;
inline constexpr std::uint64_t kMaxIdleTimeout = 0x01;
inline constexpr std::uint64_t kStatelessResetToken = 0x02;
inline constexpr std::uint64_t kMaxUdpPayloadSize = 0x03;
inline constexpr std::uint64_t kInitialMaxData = 0x04;
inline constexpr std::uint64_t kInitialMaxStreamDataBidiLocal = 0x05;
inline constexpr std::uint64_t kInitialMaxStreamDataBidiRemote = 0x06;
inline constexpr std::uint64_t kInitialMaxStreamDataUni = 0x07;
inline constexpr std::uint64_t kInitialMaxStreamsBidi = 0x08;
inline constexpr std::uint64_t kInitialMaxStreamsUni = 0x09;
inline constexpr std::uint64_t kAckDelayExponent = 0x0a;
inline constexpr std::uint64_t kMaxAckDelay = 0x0b;
inline constexpr std::uint64_t kDisableActiveMigration = 0x0c;
inline constexpr std::uint64_t kPreferredAddress = 0x0d;
inline constexpr std::uint64_t kActiveConnectionIdLimit = 0x0e;
inline constexpr std::uint64_t kInitialSourceConnectionId = 0x0f;
inline constexpr std::uint64_t kRetrySourceConnectionId = 0x10;
}  // namespace tp_id

/// Ordered id -> raw value list. Values are kept as the exact bytes that were
/// on the wire so unknown parameters survive into traces untouched.
class TransportParameters {
 public:
  struct Entry {
    std::uint64_t id = 0;
    Bytes value;
    bool operator==(const Entry&) const = default;
  };

  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }
  const std::vector<Entry>& entries() const { return entries_; }

  bool contains(std::uint64_t id) const { return find(id) != nullptr; }
  const Bytes* find(std::uint64_t id) const;
  void set_raw(std::uint64_t id, Bytes value);
  void set_integer(std::uint64_t id, std::uint64_t value);
  /// Empty if absent or not a well-formed varint value.
  std::optional<std::uint64_t> integer(std::uint64_t id) const;

  std::optional<std::uint64_t> initial_max_stream_data_bidi_local() const {
    return integer(tp_id::kInitialMaxStreamDataBidiLocal);
  }
  std::optional<std::uint64_t> initial_max_stream_data_bidi_remote() const {
    return integer(tp_id::kInitialMaxStreamDataBidiRemote);
  }
  std::optional<std::uint64_t> initial_max_data() const {
    return integer(tp_id::kInitialMaxData);
  }
  std::optional<std::uint64_t> initial_max_streams_bidi() const {
    return integer(tp_id::kInitialMaxStreamsBidi);
  }
  std::optional<std::uint64_t> max_idle_timeout() const {
    return integer(tp_id::kMaxIdleTimeout);
  }
  std::optional<ConnectionId> original_dcid() const;
  std::optional<ConnectionId> initial_scid() const;

  void set_initial_max_stream_data_bidi_local(std::uint64_t v) {
    set_integer(tp_id::kInitialMaxStreamDataBidiLocal, v);
  }
  void set_initial_max_stream_data_bidi_remote(std::uint64_t v) {
    set_integer(tp_id::kInitialMaxStreamDataBidiRemote, v);
  }
  void set_initial_max_data(std::uint64_t v) {
    set_integer(tp_id::kInitialMaxData, v);
  }
  void set_initial_max_streams_bidi(std::uint64_t v) {
    set_integer(tp_id::kInitialMaxStreamsBidi, v);
  }
  void set_max_idle_timeout(std::uint64_t ms) {
    set_integer(tp_id::kMaxIdleTimeout, ms);
  }
  void set_original_dcid(const ConnectionId& cid) {
    set_raw(tp_id::kOriginalDestinationConnectionId, cid.bytes());
  }
  void set_initial_scid(const ConnectionId& cid) {
    set_raw(tp_id::kInitialSourceConnectionId, cid.bytes());
  }

  bool operator==(const TransportParameters&) const = default;

 private:
  std::vector<Entry> entries_;
};

std::string transport_parameter_name(std::uint64_t id);

Bytes encode_transport_parameters(const TransportParameters& tp);

/// Encodes one TLV; concatenating these is how a misbehaving peer can be
/// made to repeat an id.
Bytes encode_transport_parameter(std::uint64_t id, ByteSpan value);

/// Strict: a repeated id raises ParseError.
TransportParameters decode_transport_parameters(ByteSpan data);

struct LenientTransportParameters {
  TransportParameters parameters;  // first occurrence wins
  std::vector<std::uint64_t> duplicate_ids;
};

LenientTransportParameters decode_transport_parameters_lenient(ByteSpan data);

}  // namespace qtracker::wire
