#include "qtracker/traces/grid.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

namespace qtracker::traces {

namespace {

std::string escape(const std::string& s) {
  std::string out;
  for (const char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (const char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

}  // namespace

Grid build_grid(const RunCorpus& corpus, const std::string& date,
                const std::vector<std::string>& scenario_order) {
  Grid g;
  g.date = date;
  std::set<std::string> endpoints;
  std::set<std::string> extra;
  for (const auto& e : corpus.entries) {
    if (e.date != date) continue;
    endpoints.insert(endpoint_key(e.trace.target));
    if (std::find(scenario_order.begin(), scenario_order.end(), e.trace.scenario) ==
        scenario_order.end()) {
      extra.insert(e.trace.scenario);
    }
  }
  g.scenarios = scenario_order;
  g.scenarios.insert(g.scenarios.end(), extra.begin(), extra.end());
  g.endpoints.assign(endpoints.begin(), endpoints.end());
  for (const auto& ep : g.endpoints) {
    auto& row = g.cells.emplace_back();
    for (const auto& sc : g.scenarios) {
      GridCell cell;
      if (const auto* e = corpus.find(date, ep, sc)) {
        cell.error_code = e->trace.error_code;
        cell.trace_path = e->path;
      }
      row.push_back(cell);
    }
  }
  return g;
}

std::string render_grid_html(const Grid& grid, const std::filesystem::path& html_dir) {
  static const std::map<Outcome, const char*> kColor{
      {Outcome::success, "#8fd19e"}, {Outcome::failure, "#f1a7a7"}, {Outcome::error, "#f3d58a"}};
  std::ostringstream out;
  out << "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>Results "
      << escape(grid.date) << "</title></head>\n<body style=\"font-family:sans-serif\">\n"
      << "<h1>Results grid " << escape(grid.date) << "</h1>\n"
      << "<table style=\"border-collapse:collapse\">\n<tr><th></th>";
  for (const auto& s : grid.scenarios) {
    out << "<th style=\"padding:4px 8px\">" << escape(s) << "</th>";
  }
  out << "</tr>\n";
  for (std::size_t r = 0; r < grid.endpoints.size(); ++r) {
    out << "<tr><th style=\"text-align:left;padding:4px 8px\">" << escape(grid.endpoints[r])
        << "</th>";
    for (const auto& cell : grid.cells[r]) {
      if (!cell.error_code) {
        out << "<td style=\"border:1px solid #ccc\"></td>";
        continue;
      }
      const auto outcome = outcome_of(*cell.error_code);
      auto link = cell.trace_path;
      if (!html_dir.empty() && !link.empty()) link = link.lexically_relative(html_dir);
      out << "<td class=\"" << to_string(outcome) << "\" style=\"border:1px solid #ccc;"
          << "text-align:center;background:" << kColor.at(outcome) << "\"><a href=\""
          << escape(link.generic_string()) << "\">" << *cell.error_code << "</a></td>";
    }
    out << "</tr>\n";
  }
  out << "</table>\n</body></html>\n";
  return out.str();
}

std::string render_grid_csv(const Grid& grid) {
  std::ostringstream out;
  out << "endpoint";
  for (const auto& s : grid.scenarios) out << ',' << csv_field(s);
  out << '\n';
  for (std::size_t r = 0; r < grid.endpoints.size(); ++r) {
    out << csv_field(grid.endpoints[r]);
    for (const auto& cell : grid.cells[r]) {
      out << ',';
      if (cell.error_code) out << *cell.error_code;
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace qtracker::traces
