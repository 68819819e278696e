#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "qtracker/traces/trace.hpp"

namespace qtracker::traces {

struct CorpusEntry {
  std::string date;  // run date, YYYY-MM-DD
  std::filesystem::path path;
  Trace trace;
};

/// Traces grouped by run date; (date, target, scenario) is unique.
struct RunCorpus {
  std::vector<CorpusEntry> entries;
  std::vector<std::string> warnings;

  std::vector<std::string> dates() const;
  const CorpusEntry* find(const std::string& date, const std::string& target,
                          const std::string& scenario) const;
};

/// Key used for an endpoint across the corpus: its name, or host if unnamed.
std::string endpoint_key(const TargetInfo& t);

/// Writes `<root>/<run_date>/<target>__<scenario>.json`, creating the date
/// directory. Safe to call concurrently for distinct (target, scenario).
std::filesystem::path write_trace(const Trace& t, const std::filesystem::path& root,
                                  const std::string& run_date);
/// Uses the trace's own start date as the run date.
std::filesystem::path write_trace(const Trace& t, const std::filesystem::path& root);

Trace read_trace(const std::filesystem::path& file);

/// Reads every *.json below `dir`. Unreadable files and duplicate keys are
/// skipped and reported in `warnings`.
RunCorpus read_corpus(const std::filesystem::path& dir);

}  // namespace qtracker::traces
