#include "qtracker/traces/metrics.hpp"

#include <array>
#include <cstdio>
#include <sstream>

namespace qtracker::traces {

namespace {

constexpr const char* kVersionScenario = "version_negotiation";
constexpr const char* kHandshakeScenario = "handshake";

std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}

}  // namespace

std::string format_version(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%08x", v);
  return buf;
}

VersionsOverTime metric_versions_over_time(const RunCorpus& corpus) {
  // date -> version -> endpoints
  std::map<std::string, std::map<std::uint32_t, std::set<std::string>>> seen;
  VersionsOverTime out;
  for (const auto& e : corpus.entries) {
    if (e.trace.scenario != kVersionScenario) continue;
    const auto endpoint = endpoint_key(e.trace.target);
    ++out.endpoints_tested[e.date];
    const auto it = e.trace.results.find("versions");
    if (it == e.trace.results.end() || !it->is_array()) continue;
    for (const auto& v : *it) {
      if (v.is_number_unsigned()) seen[e.date][v.get<std::uint32_t>()].insert(endpoint);
    }
  }
  for (const auto& [date, versions] : seen) {
    for (const auto& [version, endpoints] : versions) {
      out.rows.push_back({date, version, endpoints.size()});
    }
  }
  return out;
}

std::vector<HandshakeCount> metric_handshake_success(const RunCorpus& corpus) {
  std::map<std::string, HandshakeCount> by_date;
  for (const auto& e : corpus.entries) {
    if (e.trace.scenario != kHandshakeScenario) continue;
    auto& row = by_date[e.date];
    row.date = e.date;
    ++row.tested;
    if (e.trace.error_code == 0) ++row.successes;
  }
  std::vector<HandshakeCount> rows;
  for (auto& [date, row] : by_date) rows.push_back(row);
  return rows;
}

std::vector<OutcomeShare> metric_outcomes(const RunCorpus& corpus,
                                          const std::set<std::string>& handshake_scenarios) {
  std::set<std::pair<std::string, std::string>> qualified;  // (date, endpoint)
  for (const auto& e : corpus.entries) {
    if (e.trace.scenario == kHandshakeScenario && e.trace.error_code == 0) {
      qualified.emplace(e.date, endpoint_key(e.trace.target));
    }
  }
  std::map<std::string, std::array<std::size_t, 3>> counts;
  for (const auto& e : corpus.entries) {
    if (!handshake_scenarios.contains(e.trace.scenario)) continue;
    if (!qualified.contains({e.date, endpoint_key(e.trace.target)})) continue;
    ++counts[e.date][static_cast<std::size_t>(outcome_of(e.trace.error_code))];
  }
  std::vector<OutcomeShare> rows;
  for (const auto& [date, c] : counts) {
    const double total = static_cast<double>(c[0] + c[1] + c[2]);
    rows.push_back({date, 100.0 * c[0] / total, 100.0 * c[1] / total, 100.0 * c[2] / total,
                    c[0] + c[1] + c[2]});
  }
  return rows;
}

std::string versions_csv(const VersionsOverTime& v) {
  std::ostringstream out;
  out << "date,version,endpoints,endpoints_tested\n";
  for (const auto& r : v.rows) {
    const auto it = v.endpoints_tested.find(r.date);
    out << r.date << ',' << format_version(r.version) << ',' << r.endpoints << ','
        << (it == v.endpoints_tested.end() ? 0 : it->second) << '\n';
  }
  return out.str();
}

std::string handshake_csv(const std::vector<HandshakeCount>& rows) {
  std::ostringstream out;
  out << "date,successes,tested\n";
  for (const auto& r : rows) out << r.date << ',' << r.successes << ',' << r.tested << '\n';
  return out.str();
}

std::string outcomes_csv(const std::vector<OutcomeShare>& rows) {
  std::ostringstream out;
  out << "date,success_pct,failure_pct,error_pct,traces\n";
  for (const auto& r : rows) {
    out << r.date << ',' << percent(r.success) << ',' << percent(r.failure) << ','
        << percent(r.error) << ',' << r.traces << '\n';
  }
  return out.str();
}

}  // namespace qtracker::traces
