#include "qtracker/traces/trace.hpp"

#include <chrono>
#include <ctime>
#include <set>
#include <stdexcept>

#include "qtracker/wire/packet.hpp"

namespace qtracker::traces {

using nlohmann::json;

namespace {

const std::set<std::string>& known_fields() {
  static const std::set<std::string> fields{
      "format", "scenario", "scenario_version", "target", "started_at",
      "duration_ms", "error_code", "results", "packets"};
  return fields;
}

template <typename T>
T require(const json& j, const char* key) {
  if (!j.contains(key)) throw std::invalid_argument(std::string("missing field ") + key);
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw std::invalid_argument(std::string("field ") + key + " has the wrong type");
  }
}

json packet_json(const PacketRecord& p) {
  json j;
  j["direction"] = to_string(p.direction);
  j["timestamp_ms"] = p.timestamp_ms;
  j["level"] = p.level ? json(std::string(protection::to_string(*p.level))) : json(nullptr);
  j["cleartext_hex"] = wire::to_hex(wire::as_span(p.cleartext));
  if (p.dcid_len) j["dcid_len"] = *p.dcid_len;
  if (p.parse_error) j["parse_error"] = *p.parse_error;
  return j;
}

PacketRecord packet_from_json(const json& j) {
  PacketRecord p;
  const auto dir = require<std::string>(j, "direction");
  if (dir == "tx") {
    p.direction = Direction::tx;
  } else if (dir == "rx") {
    p.direction = Direction::rx;
  } else {
    throw std::invalid_argument("bad packet direction " + dir);
  }
  p.timestamp_ms = require<std::int64_t>(j, "timestamp_ms");
  if (j.contains("level") && !j.at("level").is_null()) {
    const auto name = require<std::string>(j, "level");
    p.level = protection::level_from_string(name);
    if (!p.level) throw std::invalid_argument("bad encryption level " + name);
  }
  try {
    p.cleartext = wire::from_hex(require<std::string>(j, "cleartext_hex"));
  } catch (const std::invalid_argument&) {
    throw;
  } catch (const std::exception& e) {
    throw std::invalid_argument(std::string("bad cleartext_hex: ") + e.what());
  }
  if (j.contains("dcid_len")) p.dcid_len = require<std::size_t>(j, "dcid_len");
  if (j.contains("parse_error")) p.parse_error = require<std::string>(j, "parse_error");
  return p;
}

}  // namespace

Outcome outcome_of(int error_code) {
  if (error_code == 0) return Outcome::success;
  if (error_code < 200) return Outcome::failure;
  return Outcome::error;
}

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::success: return "success";
    case Outcome::failure: return "failure";
    case Outcome::error: return "error";
  }
  return "?";
}

std::string_view to_string(Direction d) { return d == Direction::tx ? "tx" : "rx"; }

json to_json(const Trace& t) {
  json j = t.extra.is_object() ? t.extra : json::object();
  j["format"] = kTraceFormat;
  j["scenario"] = t.scenario;
  j["scenario_version"] = t.scenario_version;
  j["target"] = {{"name", t.target.name}, {"host", t.target.host}, {"ip", t.target.ip}};
  j["started_at"] = t.started_at_ms;
  j["duration_ms"] = t.duration_ms;
  j["error_code"] = t.error_code;
  j["results"] = t.results;
  auto& packets = j["packets"] = json::array();
  for (const auto& p : t.packets) packets.push_back(packet_json(p));
  return j;
}

Trace trace_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("trace is not an object");
  const int format = require<int>(j, "format");
  if (format != kTraceFormat) {
    throw std::invalid_argument("unsupported trace format " + std::to_string(format));
  }
  Trace t;
  t.scenario = require<std::string>(j, "scenario");
  t.scenario_version = require<int>(j, "scenario_version");
  const auto& target = j.at("target");
  t.target.name = require<std::string>(target, "name");
  t.target.host = require<std::string>(target, "host");
  t.target.ip = target.value("ip", "");
  t.started_at_ms = require<std::int64_t>(j, "started_at");
  t.duration_ms = require<std::int64_t>(j, "duration_ms");
  t.error_code = require<int>(j, "error_code");
  if (t.error_code < 0 || t.error_code > 255) {
    throw std::invalid_argument("error_code out of range");
  }
  t.results = j.value("results", json::object());
  for (const auto& p : require<json>(j, "packets")) t.packets.push_back(packet_from_json(p));
  for (const auto& [key, value] : j.items()) {
    if (!known_fields().contains(key)) t.extra[key] = value;
  }
  return t;
}

std::string utc_date(std::int64_t epoch_ms) {
  const std::time_t secs = static_cast<std::time_t>(epoch_ms / 1000);
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[16];
  std::strftime(buf, sizeof buf, "%Y-%m-%d", &tm);
  return buf;
}

std::int64_t now_utc_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

std::vector<std::string> verify_packets(const Trace& t) {
  std::vector<std::string> problems;
  for (std::size_t i = 0; i < t.packets.size(); ++i) {
    const auto& p = t.packets[i];
    if (p.parse_error) continue;  // already known to be unparseable
    wire::HeaderParseContext ctx;
    if (p.dcid_len) ctx.short_dcid_length = *p.dcid_len;
    try {
      wire::parse_cleartext_packet(wire::as_span(p.cleartext), ctx);
    } catch (const wire::ParseError& e) {
      problems.push_back("packet " + std::to_string(i) + ": " + e.what());
    }
  }
  return problems;
}

}  // namespace qtracker::traces
