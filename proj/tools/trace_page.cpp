#include "trace_page.hpp"

#include <sstream>

#include "qtracker/dissector/dissector.hpp"
#include "qtracker/traces/corpus.hpp"
#include "qtracker/scenarios/scenario.hpp"

namespace qtracker::tools {

namespace {

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string outcome_text(const traces::Trace& t) {
  if (t.error_code == 0) return "success";
  if (const auto* s = scenarios::find_scenario(t.scenario)) {
    if (auto d = scenarios::describe_code(*s, t.error_code)) return std::string(*d);
  }
  return std::string(traces::to_string(traces::outcome_of(t.error_code)));
}

}  // namespace

std::string render_trace_page(const traces::Trace& t, const std::filesystem::path& json_path,
                              const std::filesystem::path& page_path) {
  namespace fs = std::filesystem;
  std::error_code ec;
  auto link = fs::relative(fs::absolute(json_path), fs::absolute(page_path).parent_path(), ec);
  if (ec || link.empty()) link = json_path;

  std::ostringstream os;
  os << "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>"
     << escape(t.scenario + " / " + traces::endpoint_key(t.target)) << "</title>"
     << "<style>body{font-family:sans-serif}pre,ul.dissection{font-family:monospace}"
        "ul.dissection ul{list-style:none;padding-left:1.2em}ul.dissection{list-style:none}"
        ".error{color:#b00}</style></head><body>\n";
  os << "<h1>" << escape(t.scenario) << " on " << escape(traces::endpoint_key(t.target))
     << "</h1>\n<p>error code " << t.error_code << ": " << escape(outcome_text(t))
     << "<br>target " << escape(t.target.host) << " (" << escape(t.target.ip) << ")"
     << "<br>started " << t.started_at_ms << " ms UTC, lasted " << t.duration_ms << " ms"
     << "<br><a href=\"" << escape(link.generic_string()) << "\">trace JSON</a></p>\n";
  os << "<h2>Results</h2>\n<pre>" << escape(t.results.dump(2)) << "</pre>\n";
  os << "<h2>Packets</h2>\n";
  for (std::size_t i = 0; i < t.packets.size(); ++i) {
    const auto& p = t.packets[i];
    dissector::DissectOptions o;
    o.parameters["short_dcid_length"] = p.dcid_len.value_or(8);
    const auto root = dissector::dissect(wire::as_span(p.cleartext), dissector::quic_v1(), o);
    os << "<details><summary>#" << i << " " << traces::to_string(p.direction) << " +"
       << p.timestamp_ms << " ms";
    if (p.level) os << " " << protection::to_string(*p.level);
    os << ", " << p.cleartext.size() << " bytes";
    if (p.parse_error) os << " <span class=\"error\">" << escape(*p.parse_error) << "</span>";
    os << "</summary>\n" << dissector::render_html_fragment(root) << "</details>\n";
  }
  os << "</body></html>\n";
  return os.str();
}

}  // namespace qtracker::tools
