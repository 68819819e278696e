// Command-line front end: run the suite, post-process a corpus, dissect
// packets, list scenarios.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>

#include "qtracker/dissector/dissector.hpp"
#include "qtracker/scenarios/scenario.hpp"
#include "qtracker/traces/corpus.hpp"
#include "qtracker/traces/grid.hpp"
#include "qtracker/traces/metrics.hpp"
#include "trace_page.hpp"

using namespace qtracker;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spill(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
}

std::vector<std::string> split_names(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct RunArgs {
  std::string targets;
  std::string scenarios = "all";
  std::uint64_t seed = 0;
  std::uint64_t provider_seed = 0;
  std::uint64_t timeout_ms = 10000;
  std::string out;
  std::size_t parallel = 1;
};

int cmd_run(const RunArgs& a) {
  scenarios::SuitePlan plan;
  plan.targets = scenarios::parse_targets(slurp(a.targets));
  if (a.scenarios != "all") {
    plan.scenarios = split_names(a.scenarios);
    for (const auto& n : plan.scenarios) {
      if (!scenarios::find_scenario(n)) {
        std::cerr << "unknown scenario: " << n << "\n";
        return 2;
      }
    }
  }
  plan.seed = a.seed;
  plan.provider_seed = a.provider_seed;
  plan.timeout = std::chrono::milliseconds(a.timeout_ms);
  plan.parallel = std::max<std::size_t>(1, a.parallel);

  const std::string run_date = traces::utc_date(traces::now_utc_ms());
  std::mutex out_mu;
  plan.sink = [&](const traces::Trace& t) {
    const auto path = traces::write_trace(t, a.out, run_date);
    std::lock_guard lock(out_mu);
    std::cout << traces::endpoint_key(t.target) << "\t" << t.scenario << "\t" << t.error_code
              << "\t" << path.string() << "\n";
  };
  const auto all = scenarios::run_suite(plan);
  std::size_t ok = 0;
  for (const auto& t : all) ok += t.error_code == 0;
  std::cerr << all.size() << " traces, " << ok << " succeeded, written under " << a.out << "/"
            << run_date << "\n";
  return 0;
}

struct ReportArgs {
  std::string corpus;
  std::string out;
  std::string date;
};

int cmd_report(const ReportArgs& a) {
  const auto corpus = traces::read_corpus(a.corpus);
  for (const auto& w : corpus.warnings) std::cerr << "warning: " << w << "\n";
  const fs::path out = a.out;
  spill(out / "versions.csv", traces::versions_csv(traces::metric_versions_over_time(corpus)));
  spill(out / "handshake.csv", traces::handshake_csv(traces::metric_handshake_success(corpus)));
  spill(out / "outcomes.csv",
        traces::outcomes_csv(traces::metric_outcomes(corpus, scenarios::handshake_scenarios())));

  std::vector<std::string> order;
  for (const auto& s : scenarios::registry()) order.push_back(s.name);
  const auto dates = corpus.dates();
  std::vector<std::string> wanted;
  if (!a.date.empty()) {
    wanted.push_back(a.date);
  } else {
    wanted = dates;
  }
  for (const auto& date : wanted) {
    auto grid = traces::build_grid(corpus, date, order);
    // Cells link to rendered trace pages rather than raw JSON.
    for (std::size_t r = 0; r < grid.endpoints.size(); ++r) {
      for (std::size_t c = 0; c < grid.scenarios.size(); ++c) {
        auto& cell = grid.cells[r][c];
        if (!cell.error_code) continue;
        const auto* e = corpus.find(date, grid.endpoints[r], grid.scenarios[c]);
        if (!e) continue;
        const fs::path page = out / "traces" / date / (e->path.stem().string() + ".html");
        spill(page, tools::render_trace_page(e->trace, e->path, page));
        cell.trace_path = page;
      }
    }
    spill(out / ("grid-" + date + ".html"), traces::render_grid_html(grid, out));
    spill(out / ("grid-" + date + ".csv"), traces::render_grid_csv(grid));
  }
  std::cerr << corpus.entries.size() << " traces over " << dates.size() << " dates, report in "
            << out.string() << "\n";
  return 0;
}

struct DissectArgs {
  std::string hex;
  std::string trace;
  std::string description;
  std::size_t dcid_len = 8;
  bool html = false;
};

int cmd_dissect(const DissectArgs& a) {
  const auto desc = a.description.empty() ? dissector::quic_v1()
                                          : dissector::load_description_file(a.description);
  auto show = [&](const wire::Bytes& bytes, std::size_t dcid_len) {
    dissector::DissectOptions o;
    o.parameters["short_dcid_length"] = dcid_len;
    const auto root = dissector::dissect(wire::as_span(bytes), desc, o);
    std::cout << (a.html ? dissector::render_html(root) : dissector::render_text(root));
  };
  if (!a.hex.empty()) {
    show(wire::from_hex(a.hex), a.dcid_len);
    return 0;
  }
  const auto t = traces::read_trace(a.trace);
  for (std::size_t i = 0; i < t.packets.size(); ++i) {
    const auto& p = t.packets[i];
    if (!a.html) {
      std::cout << "# " << i << " " << traces::to_string(p.direction) << " +" << p.timestamp_ms
                << "ms\n";
    }
    show(p.cleartext, p.dcid_len.value_or(a.dcid_len));
  }
  return 0;
}

int cmd_scenarios() {
  for (const auto& s : scenarios::registry()) {
    std::cout << s.name << " (version " << s.version
              << (s.requires_handshake ? ", needs handshake" : "") << ")\n";
    std::cout << "  0  success\n";
    for (const auto& c : s.codes) std::cout << "  " << c.code << "  " << c.description << "\n";
  }
  std::cout << "prerequisite codes\n";
  for (const auto& c : scenarios::prerequisite_codes()) {
    std::cout << "  " << c.code << "  " << c.description << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"QUIC conformance test suite"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "run scenarios against targets");
  run_cmd->add_option("--targets", run.targets, "file of name,host:port lines")
      ->required()
      ->check(CLI::ExistingFile);
  run_cmd->add_option("--scenarios", run.scenarios, "comma-separated names, or all");
  run_cmd->add_option("--seed", run.seed, "execution-order seed");
  run_cmd->add_option("--provider-seed", run.provider_seed, "handshake provider seed");
  run_cmd->add_option("--timeout-ms", run.timeout_ms, "per-scenario timeout");
  run_cmd->add_option("--out", run.out, "trace directory")->required();
  run_cmd->add_option("--parallel", run.parallel, "targets run concurrently");

  ReportArgs report;
  auto* report_cmd = app.add_subcommand("report", "metrics CSVs and results grids");
  report_cmd->add_option("--corpus", report.corpus, "trace directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  report_cmd->add_option("--out", report.out, "report directory")->required();
  report_cmd->add_option("--date", report.date, "only this run date (YYYY-MM-DD)");

  DissectArgs dis;
  auto* dis_cmd = app.add_subcommand("dissect", "dissect a packet or every packet of a trace");
  auto* hex_opt = dis_cmd->add_option("--hex", dis.hex, "cleartext packet bytes");
  auto* trace_opt = dis_cmd->add_option("--trace", dis.trace, "trace JSON file")
                        ->check(CLI::ExistingFile);
  hex_opt->excludes(trace_opt);
  dis_cmd->add_option("--description", dis.description, "protocol description YAML");
  dis_cmd->add_option("--dcid-len", dis.dcid_len, "short-header connection id length");
  dis_cmd->add_flag("--html", dis.html, "HTML instead of text");

  app.add_subcommand("scenarios", "list scenarios and their error codes");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) return cmd_run(run);
    if (*report_cmd) return cmd_report(report);
    if (*dis_cmd) {
      if (dis.hex.empty() && dis.trace.empty()) {
        std::cerr << "dissect needs --hex or --trace\n";
        return 2;
      }
      return cmd_dissect(dis);
    }
    return cmd_scenarios();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
