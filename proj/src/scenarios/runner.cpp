#include <netdb.h>
#include <sys/socket.h>

#include <algorithm>
#include <atomic>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include "qtracker/conn/transport.hpp"
#include "qtracker/protection/handshake_provider.hpp"
#include "qtracker/scenarios/scenario.hpp"

namespace qtracker::scenarios {

namespace {

std::string resolve_ip(const std::string& host_port) {
  try {
    const auto ep = conn::Endpoint::parse(host_port);
    addrinfo hints{};
    hints.ai_socktype = SOCK_DGRAM;
    addrinfo* res = nullptr;
    if (::getaddrinfo(ep.host.c_str(), nullptr, &hints, &res) != 0) return {};
    char buf[NI_MAXHOST] = {};
    ::getnameinfo(res->ai_addr, res->ai_addrlen, buf, sizeof buf, nullptr, 0, NI_NUMERICHOST);
    ::freeaddrinfo(res);
    return buf;
  } catch (const std::exception&) {
    return {};
  }
}

}  // namespace

ScenarioContext::ScenarioContext(Target target, std::uint64_t provider_seed,
                                 std::uint64_t cid_seed, Duration timeout, traces::Trace& trace)
    : target_(std::move(target)),
      provider_seed_(provider_seed),
      cid_seed_(cid_seed),
      timeout_(timeout),
      start_(conn::Clock::now()),
      trace_(trace) {}

conn::TimePoint ScenarioContext::within(Duration d) const {
  return std::min(deadline(), conn::Clock::now() + d);
}

std::unique_ptr<conn::Connection> ScenarioContext::connect(const ConnectionSetup& setup) {
  conn::Endpoint ep;
  try {
    ep = conn::Endpoint::parse(target_.host);
  } catch (const std::exception& e) {
    throw conn::PrerequisiteError(e.what());
  }
  auto transport = std::make_unique<conn::UdpTransport>(ep);

  conn::ConnectionConfig cfg;
  cfg.version = setup.version;
  cfg.roster = setup.roster;
  cfg.cid_seed = cid_seed_ + static_cast<std::uint64_t>(connections_++);
  cfg.log_epoch = start_;
  cfg.withhold_handshake_flight = setup.withhold_handshake_flight;
  cfg.local_parameters = setup.local_parameters;
  cfg.remembered_peer_parameters = setup.remembered_peer_parameters;

  protection::NullProviderConfig pc;
  pc.role = protection::Role::client;
  pc.seed = provider_seed_;
  pc.nonce = cfg.cid_seed;
  pc.local_transport_parameters = wire::encode_transport_parameters(setup.local_parameters);
  pc.ticket = setup.ticket;
  pc.offer_early_data = setup.offer_early_data;
  return std::make_unique<conn::Connection>(
      cfg, std::move(transport), std::make_unique<protection::NullHandshakeProvider>(pc),
      &trace_.packets);
}

traces::Trace run_scenario(const Scenario& s, const Target& target, std::uint64_t provider_seed,
                           std::uint64_t cid_seed, Duration timeout) {
  traces::Trace trace;
  trace.scenario = s.name;
  trace.scenario_version = s.version;
  trace.target = {target.name, target.host, resolve_ip(target.host)};
  trace.started_at_ms = traces::now_utc_ms();
  const auto t0 = conn::Clock::now();
  {
    ScenarioContext ctx(target, provider_seed, cid_seed, timeout, trace);
    try {
      trace.error_code = trace.target.ip.empty() ? code::kUnresolvable : s.run(ctx);
    } catch (const conn::PrerequisiteError& e) {
      trace.error_code = code::kUnresolvable;
      trace.results["error"] = e.what();
    } catch (const std::exception& e) {
      trace.error_code = code::kInternalError;
      trace.results["error"] = e.what();
    }
  }
  trace.duration_ms =
      std::chrono::duration_cast<std::chrono::milliseconds>(conn::Clock::now() - t0).count();
  std::stable_sort(trace.packets.begin(), trace.packets.end(),
                   [](const auto& a, const auto& b) { return a.timestamp_ms < b.timestamp_ms; });
  return trace;
}

std::vector<std::size_t> execution_order(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  // Fisher-Yates with an explicit draw so the order is the same on every
  // standard library.
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

std::vector<traces::Trace> run_suite(const SuitePlan& plan) {
  std::vector<const Scenario*> chosen;
  if (plan.scenarios.empty()) {
    for (const auto& s : registry()) chosen.push_back(&s);
  } else {
    for (const auto& name : plan.scenarios) {
      const auto* s = find_scenario(name);
      if (!s) throw std::invalid_argument("unknown scenario " + name);
      chosen.push_back(s);
    }
  }
  const auto order = execution_order(chosen.size(), plan.seed);

  std::vector<std::vector<traces::Trace>> per_target(plan.targets.size());
  std::atomic<std::size_t> next{0};
  std::mutex sink_mu;
  auto worker = [&] {
    for (std::size_t t = next++; t < plan.targets.size(); t = next++) {
      for (std::size_t k = 0; k < order.size(); ++k) {
        const auto cid_seed = plan.seed * 1000003 + t * 1009 + k * 101;
        auto trace = run_scenario(*chosen[order[k]], plan.targets[t], plan.provider_seed,
                                  cid_seed, plan.timeout);
        if (plan.sink) {
          std::lock_guard lock(sink_mu);
          plan.sink(trace);
        }
        per_target[t].push_back(std::move(trace));
      }
    }
  };
  const auto threads = std::clamp<std::size_t>(plan.parallel, 1, std::max<std::size_t>(plan.targets.size(), 1));
  std::vector<std::thread> pool;
  for (std::size_t i = 1; i < threads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  std::vector<traces::Trace> all;
  for (auto& v : per_target) {
    for (auto& t : v) all.push_back(std::move(t));
  }
  return all;
}

std::vector<Target> parse_targets(std::string_view text) {
  std::vector<Target> targets;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    line = line.substr(first, line.find_last_not_of(" \t\r") - first + 1);
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw std::invalid_argument("line " + std::to_string(lineno) + ": expected name,host:port");
    }
    Target t{line.substr(0, comma), line.substr(comma + 1)};
    conn::Endpoint::parse(t.host);  // validates
    targets.push_back(std::move(t));
  }
  return targets;
}

}  // namespace qtracker::scenarios
