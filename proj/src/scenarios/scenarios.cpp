#include <algorithm>
#include <map>

#include "qtracker/protection/handshake_provider.hpp"
#include "qtracker/scenarios/scenario.hpp"
#include "qtracker/wire/frames.hpp"
#include "qtracker/wire/transport_parameters.hpp"

namespace qtracker::scenarios {

using namespace std::chrono_literals;
using conn::Clock;
using protection::EncryptionLevel;

namespace {

// Waiting phases inside the per-scenario timeout.
constexpr Duration kHandshakeWait = 3s;
constexpr Duration kVnWait = 2s;
constexpr Duration kDecryptGrace = 500ms;
constexpr Duration kValidationWindow = 1s;
constexpr Duration kSettle = 150ms;
constexpr Duration kResponseWait = 3s;
constexpr Duration kTicketWait = 1s;
constexpr Duration kCloseWait = 200ms;

// Reserved versions follow the 0x?a?a?a?a pattern.
constexpr std::uint32_t kReservedVersion = 0x1a2a3a4a;

constexpr std::uint64_t kFlowFirstLimit = 80;
constexpr std::uint64_t kFlowRaisedLimit = 160;
// More STREAM_DATA_BLOCKED frames than this on one connection is a loop.
constexpr std::size_t kBlockedLoopThreshold = 20;

bool is_reserved_version(std::uint32_t v) { return (v & 0x0f0f0f0f) == 0x0a0a0a0a; }

wire::Bytes request_for(const std::string& path) { return wire::to_bytes("GET " + path + "\r\n"); }

void finish(conn::Connection& c) {
  if (c.closed() || !c.started()) return;
  c.close(0, "");
  c.run_until([&] { return c.closed(); }, Clock::now() + kCloseWait);
}

bool one_rtt_decrypt_failed(conn::Connection& c) {
  return std::any_of(c.decryption_failures().begin(), c.decryption_failures().end(),
                     [](const conn::DecryptionFailed& f) {
                       return f.level == EncryptionLevel::one_rtt;
                     });
}

/// Runs the handshake and returns 0, or the prerequisite code for its failure.
int require_handshake(ScenarioContext& ctx, conn::Connection& c) {
  const auto outcome = conn::perform_handshake(c, ctx.within(kHandshakeWait));
  ctx.results()["handshake"] = std::string(conn::to_string(outcome.stage));
  return outcome.succeeded() ? 0 : prerequisite_for(outcome.stage);
}

const wire::Bytes* stream_body(const conn::Connection& c, std::uint64_t id) {
  const auto* s = c.find_stream(id);
  return s ? &s->recv.contiguous() : nullptr;
}

bool stream_complete(const conn::Connection& c, std::uint64_t id) {
  const auto* s = c.find_stream(id);
  return s && s->recv.complete();
}

// -- version_negotiation --------------------------------------------------

int version_negotiation(ScenarioContext& ctx) {
  ConnectionSetup setup;
  setup.version = kReservedVersion;
  auto c = ctx.connect(setup);
  c->start();
  c->run_until(
      [&] { return c->progress().version_negotiation || !c->malformed_packets().empty() ||
                   c->transport().unreachable(); },
      ctx.within(kVnWait));
  auto& versions = ctx.results()["versions"] = nlohmann::json::array();
  for (const auto v : c->progress().offered_versions) versions.push_back(v);
  ctx.results()["offered_version"] = kReservedVersion;

  const bool malformed = std::any_of(
      ctx.trace().packets.begin(), ctx.trace().packets.end(), [](const traces::PacketRecord& p) {
        return p.direction == traces::Direction::rx && !p.level && p.parse_error;
      });
  if (malformed) return 1;
  if (!c->progress().version_negotiation) return code::kNoVersionNegotiation;
  const auto& offered = c->progress().offered_versions;
  if (offered.empty() ||
      std::any_of(offered.begin(), offered.end(), [](auto v) { return is_reserved_version(v); })) {
    return 1;
  }
  return code::kSuccess;
}

// -- handshake -------------------------------------------------------------

int handshake(ScenarioContext& ctx) {
  auto c = ctx.connect();
  const auto outcome = conn::perform_handshake(*c, ctx.within(kHandshakeWait));
  ctx.results()["stage"] = std::string(conn::to_string(outcome.stage));
  switch (outcome.stage) {
    case conn::HandshakeStage::succeeded: break;
    case conn::HandshakeStage::unreachable:
    case conn::HandshakeStage::no_response: return code::kNoResponse;
    case conn::HandshakeStage::version_mismatch: return 2;
    case conn::HandshakeStage::handshake_incomplete:
    case conn::HandshakeStage::keys_unavailable: return 3;
  }
  // The first 1-RTT packets from the server arrive around now.
  c->run_until([&] { return c->progress().handshake_done_received || one_rtt_decrypt_failed(*c); },
               ctx.within(kDecryptGrace));
  const bool failed = one_rtt_decrypt_failed(*c);
  ctx.results()["handshake_done"] = c->progress().handshake_done_received;
  ctx.results()["one_rtt_decrypt_failures"] = failed;
  finish(*c);
  return failed ? 4 : code::kSuccess;
}

// -- transport_parameters --------------------------------------------------

int transport_parameters(ScenarioContext& ctx) {
  auto c = ctx.connect();
  if (const int rc = require_handshake(ctx, *c)) return rc;
  const auto raw = c->provider().peer_transport_parameters_raw();
  finish(*c);
  if (!raw) return code::kFeatureAbsent;
  ctx.results()["raw"] = wire::to_hex(wire::as_span(*raw));
  const auto lenient = wire::decode_transport_parameters_lenient(wire::as_span(*raw));
  auto& params = ctx.results()["parameters"] = nlohmann::json::array();
  for (const auto& e : lenient.parameters.entries()) {
    params.push_back({{"id", e.id},
                      {"name", wire::transport_parameter_name(e.id)},
                      {"value", wire::to_hex(wire::as_span(e.value))}});
  }
  ctx.results()["duplicates"] = lenient.duplicate_ids;
  try {
    wire::decode_transport_parameters(wire::as_span(*raw));
  } catch (const wire::ParseError& e) {
    ctx.results()["error"] = e.what();
    return 5;
  }
  return code::kSuccess;
}

// -- address_validation -----------------------------------------------------

int address_validation(ScenarioContext& ctx) {
  ConnectionSetup setup;
  setup.roster = conn::AgentRoster::all().without(conn::AgentId::ack);
  setup.withhold_handshake_flight = true;
  auto c = ctx.connect(setup);
  c->start();
  c->run_until([&] { return c->transport().unreachable(); }, ctx.within(kValidationWindow));
  const auto sent = c->bytes_sent;
  const auto received = c->bytes_received;
  const double ratio = sent == 0 ? 0.0 : static_cast<double>(received) / static_cast<double>(sent);
  ctx.results()["client_bytes_sent"] = sent;
  ctx.results()["bytes_received_before_validation"] = received;
  ctx.results()["ratio"] = ratio;
  // Never completes: the server is not allowed to see our Handshake flight.
  if (c->datagrams_received == 0) return code::kNoResponse;
  return ratio > 3.0 ? 6 : code::kSuccess;
}

// -- flow_control ------------------------------------------------------------

int flow_control(ScenarioContext& ctx) {
  ConnectionSetup setup;
  setup.local_parameters.set_initial_max_stream_data_bidi_local(kFlowFirstLimit);
  auto c = ctx.connect(setup);

  struct Observed {
    std::uint64_t limit = kFlowFirstLimit;
    bool raised = false;
    bool empty_frame = false;
    bool over_limit = false;
    std::size_t blocked = 0;
    std::uint64_t first_burst = 0;  // highest end before the raise
    std::uint64_t highest = 0;
    nlohmann::json frames = nlohmann::json::array();
  } seen;
  c->add_observer([&](const conn::Event& ev) {
    const auto* r = std::get_if<conn::PacketReceived>(&ev);
    if (!r || r->level != EncryptionLevel::one_rtt) return;
    for (const auto& f : r->frames) {
      if (const auto* s = std::get_if<wire::StreamFrame>(&f); s && s->stream_id == 0) {
        const auto end = s->offset + s->data.size();
        if (s->empty_non_fin()) seen.empty_frame = true;
        if (end > seen.limit) seen.over_limit = true;
        seen.highest = std::max(seen.highest, end);
        if (!seen.raised) seen.first_burst = std::max(seen.first_burst, end);
        seen.frames.push_back({{"offset", s->offset},
                               {"length", s->data.size()},
                               {"fin", s->fin},
                               {"after_raise", seen.raised}});
      } else if (std::holds_alternative<wire::StreamDataBlockedFrame>(f)) {
        ++seen.blocked;
      }
    }
  });

  if (const int rc = require_handshake(ctx, *c)) return rc;
  const auto req = request_for(ctx.path);
  c->send_stream(0, wire::as_span(req), true);
  c->run_until([&] { return seen.highest >= kFlowFirstLimit || stream_complete(*c, 0); },
               ctx.within(kResponseWait));
  // Give a misbehaving server time to overrun the limit.
  c->run_until([] { return false; }, ctx.within(kSettle));

  const bool short_body = stream_complete(*c, 0) && !seen.over_limit;
  if (!short_body) {
    seen.raised = true;
    seen.limit = kFlowRaisedLimit;
    c->raise_stream_limit(0, kFlowRaisedLimit);
    c->run_until([&] { return seen.highest >= kFlowRaisedLimit || stream_complete(*c, 0); },
                 ctx.within(kResponseWait));
    c->run_until([] { return false; }, ctx.within(kSettle));
  }
  finish(*c);

  auto& res = ctx.results();
  res["frames"] = seen.frames;
  res["first_burst_bytes"] = seen.first_burst;
  res["total_bytes"] = seen.highest;
  res["stream_data_blocked_frames"] = seen.blocked;
  if (const auto* body = stream_body(*c, 0)) res["body_bytes"] = body->size();

  if (seen.empty_frame) return 8;
  if (seen.over_limit) return 7;
  if (seen.blocked > kBlockedLoopThreshold) return 10;
  const auto* s = c->find_stream(0);
  if (s && s->recv.final_size() && *s->recv.final_size() < kFlowRaisedLimit) {
    return code::kFeatureAbsent;
  }
  if (seen.highest <= kFlowFirstLimit) return 9;
  return code::kSuccess;
}

// -- stream_opening_reordering --------------------------------------------------

int stream_opening_reordering(ScenarioContext& ctx) {
  auto c = ctx.connect();
  bool malformed_ack = false;
  c->add_observer([&](const conn::Event& ev) {
    const auto* r = std::get_if<conn::PacketReceived>(&ev);
    if (!r) return;
    for (const auto& a : r->anomalies) {
      if (a.kind == wire::AnomalyKind::ack_range_underflow) malformed_ack = true;
    }
  });
  if (const int rc = require_handshake(ctx, *c)) return rc;

  const auto req = request_for(ctx.path);
  const auto pn = c->reserve_packet_numbers(EncryptionLevel::one_rtt, 2);
  // The closing half goes out first, under the higher packet number.
  c->send_packet_with_number(EncryptionLevel::one_rtt, pn + 1,
                             {wire::StreamFrame{0, req.size(), {}, true}});
  c->send_packet_with_number(EncryptionLevel::one_rtt, pn,
                             {wire::StreamFrame{0, 0, req, false}});
  ctx.results()["packet_numbers"] = {pn + 1, pn};

  const auto peer_closed = [&] { return c->closed() && c->close_info() && c->close_info()->by_peer; };
  c->run_until([&] { return malformed_ack || peer_closed() || stream_complete(*c, 0); },
               ctx.within(kResponseWait));
  const bool answered = stream_complete(*c, 0);
  const bool closed_by_peer = peer_closed();
  ctx.results()["answered"] = answered;
  ctx.results()["malformed_ack"] = malformed_ack;
  ctx.results()["closed_by_peer"] = closed_by_peer;
  finish(*c);

  if (malformed_ack) return 13;
  if (closed_by_peer) return 12;
  return answered ? code::kSuccess : 11;
}

// -- zero_rtt -------------------------------------------------------------------

int zero_rtt(ScenarioContext& ctx) {
  auto& res = ctx.results();
  res["ticket_received"] = false;
  res["zero_rtt_accepted"] = false;
  res["request_answered"] = false;

  std::optional<wire::Bytes> ticket;
  std::optional<wire::TransportParameters> remembered;
  {
    auto first = ctx.connect();
    if (const int rc = require_handshake(ctx, *first)) return rc;
    first->run_until([&] { return first->provider().resumption_ticket().has_value(); },
                     ctx.within(kTicketWait));
    ticket = first->provider().resumption_ticket();
    remembered = first->peer_parameters();
    finish(*first);
  }
  if (!ticket) return 14;
  res["ticket_received"] = true;

  ConnectionSetup setup;
  setup.ticket = ticket;
  setup.offer_early_data = true;
  setup.remembered_peer_parameters = remembered;
  auto second = ctx.connect(setup);
  second->start();
  const auto req = request_for(ctx.path);
  if (second->write_key(EncryptionLevel::zero_rtt)) {
    second->send_stream(0, wire::as_span(req), true, EncryptionLevel::zero_rtt);
  }
  const auto outcome = conn::perform_handshake(*second, ctx.within(kHandshakeWait));
  res["resumed_handshake"] = std::string(conn::to_string(outcome.stage));
  if (!outcome.succeeded()) {
    finish(*second);
    return prerequisite_for(outcome.stage);
  }
  if (!second->provider().early_data_accepted()) {
    finish(*second);
    return 15;
  }
  res["zero_rtt_accepted"] = true;
  second->run_until([&] { return stream_complete(*second, 0); }, ctx.within(kResponseWait));
  const bool answered = stream_complete(*second, 0);
  res["request_answered"] = answered;
  finish(*second);
  return answered ? code::kSuccess : 16;
}

}  // namespace

int prerequisite_for(conn::HandshakeStage stage) {
  switch (stage) {
    case conn::HandshakeStage::succeeded: return code::kSuccess;
    case conn::HandshakeStage::unreachable:
    case conn::HandshakeStage::no_response: return code::kNoResponse;
    default: return code::kHandshakeUnavailable;
  }
}

std::vector<ErrorCodeInfo> prerequisite_codes() {
  return {
      {code::kUnresolvable, "target address could not be resolved"},
      {code::kNoVersionNegotiation, "no Version Negotiation packet in reply to a reserved version"},
      {code::kNoResponse, "endpoint unreachable or silent"},
      {code::kFeatureAbsent, "required feature or resource absent"},
      {code::kHandshakeUnavailable, "handshake did not complete"},
      {code::kInternalError, "the suite itself failed while running the scenario"},
  };
}

const std::vector<Scenario>& registry() {
  static const std::vector<Scenario> all{
      {"version_negotiation", 1, false,
       {{1, "malformed Version Negotiation packet, or it lists the reserved version"}},
       version_negotiation},
      {"handshake", 1, false,
       {{2, "server answered with Version Negotiation"},
        {3, "handshake stalled before completion"},
        {4, "1-RTT packet from the server failed authentication"}},
       handshake},
      {"transport_parameters", 1, true,
       {{5, "duplicate or malformed transport parameter encoding"}},
       transport_parameters},
      {"address_validation", 1, true,
       {{6, "server sent more than 3x the bytes received before validating the address"}},
       address_validation},
      {"flow_control", 1, true,
       {{7, "stream data sent beyond the advertised limit"},
        {8, "empty STREAM frame received"},
        {9, "no data sent after the limit was raised"},
        {10, "STREAM_DATA_BLOCKED loop (more than 20 frames)"}},
       flow_control},
      {"stream_opening_reordering", 1, true,
       {{11, "request not answered after a reordered stream opening"},
        {12, "server closed the connection"},
        {13, "ACK frame with a range below packet number zero"}},
       stream_opening_reordering},
      {"zero_rtt", 1, true,
       {{14, "no resumption ticket received"},
        {15, "0-RTT data rejected"},
        {16, "0-RTT request accepted but not answered"}},
       zero_rtt},
  };
  return all;
}

const Scenario* find_scenario(std::string_view name) {
  for (const auto& s : registry()) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

std::set<std::string> handshake_scenarios() {
  std::set<std::string> names;
  for (const auto& s : registry()) {
    if (s.requires_handshake) names.insert(s.name);
  }
  return names;
}

std::optional<std::string_view> describe_code(const Scenario& s, int c) {
  if (c == code::kSuccess) return "success";
  for (const auto& info : s.codes) {
    if (info.code == c) return info.description;
  }
  for (const auto& info : prerequisite_codes()) {
    if (info.code == c) return info.description;
  }
  return std::nullopt;
}

}  // namespace qtracker::scenarios
