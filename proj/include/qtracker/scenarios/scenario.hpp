#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "qtracker/conn/connection.hpp"
#include "qtracker/conn/handshake.hpp"
#include "qtracker/traces/trace.hpp"

namespace qtracker::scenarios {

using Duration = std::chrono::milliseconds;

struct Target {
  std::string name;
  std::string host;  // host:port
};

/// Prerequisite codes shared by every scenario.
namespace code {
inline constexpr int kSuccess = 0;
inline constexpr int kUnresolvable = 200;
inline constexpr int kNoVersionNegotiation = 201;
inline constexpr int kNoResponse = 202;
inline constexpr int kFeatureAbsent = 203;
inline constexpr int kHandshakeUnavailable = 204;
inline constexpr int kInternalError = 255;
}  // namespace code

/// Knobs for one connection opened by a scenario.
struct ConnectionSetup {
  std::uint32_t version = wire::kQuicVersion1;
  conn::AgentRoster roster = conn::AgentRoster::all();
  wire::TransportParameters local_parameters = conn::default_client_parameters();
  bool withhold_handshake_flight = false;
  std::optional<wire::Bytes> ticket;
  bool offer_early_data = false;
  std::optional<wire::TransportParameters> remembered_peer_parameters;
};

/// What a running scenario sees: its target, the trace it fills in, and a
/// factory for fresh connections whose packets land in that trace.
class ScenarioContext {
 public:
  ScenarioContext(Target target, std::uint64_t provider_seed, std::uint64_t cid_seed,
                  Duration timeout, traces::Trace& trace);

  const Target& target() const { return target_; }
  Duration timeout() const { return timeout_; }
  conn::TimePoint deadline() const { return start_ + timeout_; }
  /// min(deadline, now + d): caps a waiting phase inside the overall timeout.
  conn::TimePoint within(Duration d) const;
  traces::Trace& trace() { return trace_; }
  nlohmann::json& results() { return trace_.results; }

  /// Throws conn::PrerequisiteError when the target cannot be resolved.
  std::unique_ptr<conn::Connection> connect(const ConnectionSetup& setup = {});

  std::string path = "/index.html";

 private:
  Target target_;
  std::uint64_t provider_seed_;
  std::uint64_t cid_seed_;
  Duration timeout_;
  conn::TimePoint start_;
  traces::Trace& trace_;
  int connections_ = 0;
};

struct ErrorCodeInfo {
  int code;
  std::string_view description;
};

struct Scenario {
  std::string name;
  int version = 1;
  bool requires_handshake = false;
  std::vector<ErrorCodeInfo> codes;  // scenario-specific, prerequisites excluded
  std::function<int(ScenarioContext&)> run;
};

/// The seven scenarios in their canonical order.
const std::vector<Scenario>& registry();
const Scenario* find_scenario(std::string_view name);
/// Names of the scenarios that need a completed handshake.
std::set<std::string> handshake_scenarios();

/// Every registered code with its meaning: prerequisites first, then each
/// scenario's own codes.
std::vector<ErrorCodeInfo> prerequisite_codes();
std::optional<std::string_view> describe_code(const Scenario& s, int code);

/// Maps a failed handshake outcome to the prerequisite code it implies.
int prerequisite_for(conn::HandshakeStage stage);

struct SuitePlan {
  std::vector<Target> targets;
  std::vector<std::string> scenarios;  // empty: all
  std::uint64_t seed = 0;              // execution order
  std::uint64_t provider_seed = 0;     // NullHandshakeProvider seed
  Duration timeout = std::chrono::seconds(10);
  std::size_t parallel = 1;
  /// Called once per finished trace, possibly from several threads.
  std::function<void(const traces::Trace&)> sink;
};

/// Seed-determined permutation of `n` indices.
std::vector<std::size_t> execution_order(std::size_t n, std::uint64_t seed);

/// Runs a single scenario against a target on fresh connections.
traces::Trace run_scenario(const Scenario& s, const Target& target, std::uint64_t provider_seed,
                           std::uint64_t cid_seed, Duration timeout);

/// One trace per (target, scenario). Never throws for target-side failures.
std::vector<traces::Trace> run_suite(const SuitePlan& plan);

/// Reads "name,host:port" lines; blank lines and # comments are skipped.
std::vector<Target> parse_targets(std::string_view text);

}  // namespace qtracker::scenarios
