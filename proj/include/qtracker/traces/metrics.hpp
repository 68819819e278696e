#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "qtracker/traces/corpus.hpp"

namespace qtracker::traces {

struct VersionCount {
  std::string date;
  std::uint32_t version = 0;
  std::size_t endpoints = 0;
  bool operator==(const VersionCount&) const = default;
};

struct VersionsOverTime {
  std::vector<VersionCount> rows;  // sorted by date, then version
  std::map<std::string, std::size_t> endpoints_tested;
};

/// Endpoints announcing each version per run date, from version_negotiation
/// traces whose results carry a `versions` list.
VersionsOverTime metric_versions_over_time(const RunCorpus& corpus);

struct HandshakeCount {
  std::string date;
  std::size_t successes = 0;
  std::size_t tested = 0;
  bool operator==(const HandshakeCount&) const = default;
};

std::vector<HandshakeCount> metric_handshake_success(const RunCorpus& corpus);

struct OutcomeShare {
  std::string date;
  double success = 0;  // percent
  double failure = 0;
  double error = 0;
  std::size_t traces = 0;
};

/// Outcome percentages over `handshake_scenarios`, counting only endpoints
/// whose handshake trace of the same date succeeded. Dates without such an
/// endpoint are omitted.
std::vector<OutcomeShare> metric_outcomes(const RunCorpus& corpus,
                                          const std::set<std::string>& handshake_scenarios);

std::string versions_csv(const VersionsOverTime& v);
std::string handshake_csv(const std::vector<HandshakeCount>& rows);
std::string outcomes_csv(const std::vector<OutcomeShare>& rows);

std::string format_version(std::uint32_t v);

}  // namespace qtracker::traces
