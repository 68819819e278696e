#include "qtracker/traces/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

namespace qtracker::traces {

namespace fs = std::filesystem;

namespace {

std::string sanitize(std::string s) {
  for (auto& c : s) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_' && c != '.') c = '_';
  }
  return s.empty() ? "_" : s;
}

bool looks_like_date(const std::string& s) {
  static const std::regex re(R"(\d{4}-\d{2}-\d{2})");
  return std::regex_match(s, re);
}

}  // namespace

std::string endpoint_key(const TargetInfo& t) { return t.name.empty() ? t.host : t.name; }

std::vector<std::string> RunCorpus::dates() const {
  std::set<std::string> d;
  for (const auto& e : entries) d.insert(e.date);
  return {d.begin(), d.end()};
}

const CorpusEntry* RunCorpus::find(const std::string& date, const std::string& target,
                                   const std::string& scenario) const {
  for (const auto& e : entries) {
    if (e.date == date && endpoint_key(e.trace.target) == target && e.trace.scenario == scenario) {
      return &e;
    }
  }
  return nullptr;
}

fs::path write_trace(const Trace& t, const fs::path& root, const std::string& run_date) {
  const auto dir = root / run_date;
  fs::create_directories(dir);
  const auto file = dir / (sanitize(endpoint_key(t.target)) + "__" + sanitize(t.scenario) + ".json");
  const auto tmp = fs::path(file).concat(".tmp");
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << to_json(t).dump(1) << '\n';
  }
  fs::rename(tmp, file);
  return file;
}

fs::path write_trace(const Trace& t, const fs::path& root) {
  return write_trace(t, root, utc_date(t.started_at_ms));
}

Trace read_trace(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open " + file.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(e.what());
  }
  return trace_from_json(j);
}

RunCorpus read_corpus(const fs::path& dir) {
  RunCorpus corpus;
  if (!fs::is_directory(dir)) {
    corpus.warnings.push_back(dir.string() + ": not a directory");
    return corpus;
  }
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::set<std::tuple<std::string, std::string, std::string>> seen;
  for (const auto& f : files) {
    CorpusEntry entry;
    try {
      entry.trace = read_trace(f);
    } catch (const std::exception& e) {
      corpus.warnings.push_back(f.string() + ": " + e.what());
      continue;
    }
    const auto parent = f.parent_path().filename().string();
    entry.date = looks_like_date(parent) ? parent : utc_date(entry.trace.started_at_ms);
    entry.path = f;
    auto key = std::make_tuple(entry.date, endpoint_key(entry.trace.target), entry.trace.scenario);
    if (!seen.insert(key).second) {
      corpus.warnings.push_back(f.string() + ": duplicate trace for " + std::get<1>(key) + "/" +
                                std::get<2>(key) + " on " + entry.date);
      continue;
    }
    corpus.entries.push_back(std::move(entry));
  }
  return corpus;
}

}  // namespace qtracker::traces
