#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qtracker/protection/keys.hpp"
#include "qtracker/wire/bytes.hpp"

namespace qtracker::traces {

enum class Direction : std::uint8_t { tx, rx };

/// One packet of the cleartext log: header with the packet number as sent,
/// followed by the decrypted payload.
struct PacketRecord {
  Direction direction = Direction::tx;
  std::int64_t timestamp_ms = 0;  // offset from the trace start
  std::optional<protection::EncryptionLevel> level;  // none for VN and retry
  wire::Bytes cleartext;
  /// Destination connection id length, needed to re-parse short headers.
  std::optional<std::size_t> dcid_len;
  /// Set when the suite itself could not parse the decrypted payload.
  std::optional<std::string> parse_error;

  bool operator==(const PacketRecord&) const = default;
};

struct TargetInfo {
  std::string name;
  std::string host;  // host:port as given
  std::string ip;    // resolved address, empty when resolution failed

  bool operator==(const TargetInfo&) const = default;
};

inline constexpr int kTraceFormat = 1;

struct Trace {
  std::string scenario;
  int scenario_version = 1;
  TargetInfo target;
  std::int64_t started_at_ms = 0;  // UTC, milliseconds since the epoch
  std::int64_t duration_ms = 0;
  int error_code = 0;
  nlohmann::json results = nlohmann::json::object();
  std::vector<PacketRecord> packets;
  /// Fields of a read trace this version does not know, kept for rewriting.
  nlohmann::json extra = nlohmann::json::object();

  bool operator==(const Trace&) const = default;
};

enum class Outcome : std::uint8_t { success, failure, error };

/// 0 is success, 1-199 a scenario failure, 200-255 a missing prerequisite.
Outcome outcome_of(int error_code);
std::string_view to_string(Outcome o);

std::string_view to_string(Direction d);

nlohmann::json to_json(const Trace& t);
/// Throws std::invalid_argument when a required field is missing or mistyped.
Trace trace_from_json(const nlohmann::json& j);

/// UTC calendar date ("YYYY-MM-DD") of a millisecond timestamp.
std::string utc_date(std::int64_t epoch_ms);
std::int64_t now_utc_ms();

/// Problems found re-parsing the logged cleartext, one line per packet.
std::vector<std::string> verify_packets(const Trace& t);

}  // namespace qtracker::traces
