#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "qtracker/traces/corpus.hpp"
#include "qtracker/traces/grid.hpp"
#include "qtracker/traces/metrics.hpp"
#include "qtracker/wire/packet.hpp"

using namespace qtracker;
using namespace qtracker::traces;
namespace fs = std::filesystem;

namespace {

const std::set<std::string> kHandshakeScenarios{
    "transport_parameters", "address_validation", "flow_control", "stream_opening_reordering",
    "zero_rtt"};

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("qtracker-traces-" + std::to_string(std::random_device{}()));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

Trace make_trace(const std::string& endpoint, const std::string& scenario, int code) {
  Trace t;
  t.scenario = scenario;
  t.target = {endpoint, endpoint + ":4433", "192.0.2.1"};
  t.started_at_ms = 1527811200000;  // 2018-06-01T00:00:00Z
  t.duration_ms = 12;
  t.error_code = code;
  return t;
}

CorpusEntry entry(const std::string& date, Trace t) {
  return {date, fs::path(date) / (t.target.name + "__" + t.scenario + ".json"), std::move(t)};
}

Trace vn_trace(const std::string& endpoint, std::vector<std::uint32_t> versions) {
  auto t = make_trace(endpoint, "version_negotiation", 0);
  t.results["versions"] = versions;
  return t;
}

}  // namespace

TEST(TraceJson, RoundTripIsLossless) {
  auto t = make_trace("alpha", "handshake", 3);
  t.results = {{"stage", "handshake_incomplete"}, {"nested", {1, 2, 3}}};
  PacketRecord p;
  p.direction = Direction::rx;
  p.timestamp_ms = 5;
  p.level = protection::EncryptionLevel::one_rtt;
  p.cleartext = wire::from_hex("41" "0102030405060708" "00" "01");
  p.dcid_len = 8;
  t.packets.push_back(p);
  PacketRecord vn;
  vn.cleartext = wire::from_hex("c5000000000000");
  vn.parse_error = "truncated";
  t.packets.push_back(vn);
  EXPECT_EQ(trace_from_json(to_json(t)), t);
}

TEST(TraceJson, UnknownFieldsArePreserved) {
  auto j = to_json(make_trace("alpha", "handshake", 0));
  j["annotator"] = {{"note", "kept"}};
  const auto t = trace_from_json(j);
  EXPECT_EQ(t.extra["annotator"]["note"], "kept");
  EXPECT_EQ(to_json(t), j);
}

TEST(TraceJson, VersionListIsPreservedExactly) {
  const auto t = vn_trace("alpha", {0xff00000du, 0x00000001u, 0x1a2a3a4au});
  const auto back = trace_from_json(to_json(t));
  EXPECT_EQ(back.results["versions"], t.results["versions"]);
}

TEST(TraceJson, MissingFieldIsRejected) {
  auto j = to_json(make_trace("alpha", "handshake", 0));
  j.erase("error_code");
  EXPECT_THROW(trace_from_json(j), std::invalid_argument);
}

TEST(Corpus, FileRoundTrip) {
  TempDir dir;
  auto t = make_trace("alpha", "flow_control", 7);
  const auto path = write_trace(t, dir.path());
  EXPECT_EQ(path.parent_path().filename(), "2018-06-01");
  EXPECT_EQ(read_trace(path), t);
}

TEST(Corpus, CorruptFileIsSkippedWithWarning) {
  TempDir dir;
  for (int i = 0; i < 9; ++i) {
    write_trace(make_trace("ep" + std::to_string(i), "handshake", 0), dir.path());
  }
  std::ofstream(dir.path() / "2018-06-01" / "broken.json") << "{\"format\": 1, \"scen";
  const auto corpus = read_corpus(dir.path());
  EXPECT_EQ(corpus.entries.size(), 9u);
  ASSERT_EQ(corpus.warnings.size(), 1u);
  EXPECT_NE(corpus.warnings[0].find("broken.json"), std::string::npos);
}

TEST(Corpus, DuplicateKeyIsAWarning) {
  TempDir dir;
  const auto t = make_trace("alpha", "handshake", 0);
  write_trace(t, dir.path());
  fs::copy_file(dir.path() / "2018-06-01" / "alpha__handshake.json",
                dir.path() / "2018-06-01" / "copy.json");
  const auto corpus = read_corpus(dir.path());
  EXPECT_EQ(corpus.entries.size(), 1u);
  EXPECT_EQ(corpus.warnings.size(), 1u);
}

TEST(Metrics, ThreeEndpointsAnnouncingOneVersion) {
  RunCorpus c;
  for (const auto* ep : {"a", "b", "c"}) c.entries.push_back(entry("2018-06-01", vn_trace(ep, {0xff00000bu})));
  const auto m = metric_versions_over_time(c);
  ASSERT_EQ(m.rows.size(), 1u);
  EXPECT_EQ(m.rows[0], (VersionCount{"2018-06-01", 0xff00000bu, 3}));
  EXPECT_EQ(m.endpoints_tested.at("2018-06-01"), 3u);
}

TEST(Metrics, EndpointCountedOncePerVersion) {
  RunCorpus c;
  c.entries.push_back(entry("2018-06-01", vn_trace("a", {0xff00000bu, 0xff00000cu})));
  c.entries.push_back(entry("2018-06-01", vn_trace("b", {0xff00000cu})));
  const auto m = metric_versions_over_time(c);
  ASSERT_EQ(m.rows.size(), 2u);
  EXPECT_EQ(m.rows[0].endpoints, 1u);
  EXPECT_EQ(m.rows[1].endpoints, 2u);
}

TEST(Metrics, EmptyCorpusGivesEmptyTables) {
  const RunCorpus c;
  EXPECT_TRUE(metric_versions_over_time(c).rows.empty());
  EXPECT_TRUE(metric_handshake_success(c).empty());
  EXPECT_TRUE(metric_outcomes(c, kHandshakeScenarios).empty());
}

TEST(Metrics, HandshakeSuccessCountsOnlyZeros) {
  RunCorpus c;
  int i = 0;
  for (const int code : {0, 3, 0, 202, 4, 0}) {
    c.entries.push_back(entry("2018-06-01", make_trace("ep" + std::to_string(i++), "handshake", code)));
  }
  c.entries.push_back(entry("2018-06-02", make_trace("ep0", "handshake", 0)));
  const auto rows = metric_handshake_success(c);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0], (HandshakeCount{"2018-06-01", 3, 6}));
  EXPECT_EQ(rows[1], (HandshakeCount{"2018-06-02", 1, 1}));
}

TEST(Metrics, OutcomePercentagesFromHandCount) {
  RunCorpus c;
  const std::vector<std::string> scenarios(kHandshakeScenarios.begin(), kHandshakeScenarios.end());
  // 6 zeros, 2 failures, 2 errors over two qualifying endpoints.
  const std::vector<int> a{0, 0, 0, 7, 201};
  const std::vector<int> b{0, 0, 0, 13, 202};
  c.entries.push_back(entry("2018-06-01", make_trace("a", "handshake", 0)));
  c.entries.push_back(entry("2018-06-01", make_trace("b", "handshake", 0)));
  for (std::size_t i = 0; i < 5; ++i) {
    c.entries.push_back(entry("2018-06-01", make_trace("a", scenarios[i], a[i])));
    c.entries.push_back(entry("2018-06-01", make_trace("b", scenarios[i], b[i])));
  }
  // An endpoint failing the handshake contributes nothing.
  c.entries.push_back(entry("2018-06-01", make_trace("z", "handshake", 3)));
  for (const auto& s : scenarios) c.entries.push_back(entry("2018-06-01", make_trace("z", s, 0)));
  // A date with no qualifying endpoint is omitted.
  c.entries.push_back(entry("2018-06-02", make_trace("a", "handshake", 202)));
  c.entries.push_back(entry("2018-06-02", make_trace("a", "flow_control", 0)));

  const auto rows = metric_outcomes(c, kHandshakeScenarios);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].date, "2018-06-01");
  EXPECT_DOUBLE_EQ(rows[0].success, 60.0);
  EXPECT_DOUBLE_EQ(rows[0].failure, 20.0);
  EXPECT_DOUBLE_EQ(rows[0].error, 20.0);
  EXPECT_EQ(rows[0].traces, 10u);
  EXPECT_EQ(outcomes_csv(rows),
            "date,success_pct,failure_pct,error_pct,traces\n2018-06-01,60.0,20.0,20.0,10\n");
}

TEST(Metrics, OutcomesSumToHundredAndAreIdempotent) {
  std::mt19937_64 rng(5);
  const std::vector<std::string> scenarios(kHandshakeScenarios.begin(), kHandshakeScenarios.end());
  for (int iter = 0; iter < 200; ++iter) {
    RunCorpus c;
    for (int d = 0; d < 3; ++d) {
      const auto date = "2018-06-0" + std::to_string(d + 1);
      for (int e = 0; e < 6; ++e) {
        const auto ep = "ep" + std::to_string(e);
        c.entries.push_back(entry(date, make_trace(ep, "handshake", rng() % 3 ? 0 : 3)));
        for (const auto& s : scenarios) {
          if (rng() % 5 == 0) continue;
          const int codes[] = {0, 0, 7, 11, 201, 203};
          c.entries.push_back(entry(date, make_trace(ep, s, codes[rng() % 6])));
        }
      }
    }
    const auto rows = metric_outcomes(c, kHandshakeScenarios);
    for (const auto& r : rows) ASSERT_NEAR(r.success + r.failure + r.error, 100.0, 0.1);
    ASSERT_EQ(outcomes_csv(rows), outcomes_csv(metric_outcomes(c, kHandshakeScenarios)));
  }
}

TEST(Grid, EndpointPassingTwoScenarios) {
  RunCorpus c;
  const std::vector<std::string> order{"version_negotiation", "handshake", "transport_parameters",
                                       "flow_control"};
  c.entries.push_back(entry("2018-06-01", make_trace("picky", "version_negotiation", 0)));
  c.entries.push_back(entry("2018-06-01", make_trace("picky", "handshake", 3)));
  c.entries.push_back(entry("2018-06-01", make_trace("picky", "transport_parameters", 0)));
  c.entries.push_back(entry("2018-06-01", make_trace("picky", "flow_control", 203)));
  c.entries.push_back(entry("2018-06-01", make_trace("full", "version_negotiation", 0)));
  const auto g = build_grid(c, "2018-06-01", order);
  ASSERT_EQ(g.endpoints, (std::vector<std::string>{"full", "picky"}));
  int successes = 0;
  for (const auto& cell : g.cells[1]) successes += cell.error_code == 0;
  EXPECT_EQ(successes, 2);
  EXPECT_FALSE(g.cells[0][1].error_code.has_value());  // never run: blank

  const auto csv = render_grid_csv(g);
  EXPECT_EQ(csv,
            "endpoint,version_negotiation,handshake,transport_parameters,flow_control\n"
            "full,0,,,\n"
            "picky,0,3,0,203\n");
  const auto html = render_grid_html(g);
  EXPECT_NE(html.find("href=\"2018-06-01/picky__flow_control.json\""), std::string::npos);
  EXPECT_EQ(html.find("<script"), std::string::npos);
  EXPECT_EQ(html.find("http"), std::string::npos);  // self-contained
}

TEST(Outcome, CodeBands) {
  EXPECT_EQ(outcome_of(0), Outcome::success);
  EXPECT_EQ(outcome_of(1), Outcome::failure);
  EXPECT_EQ(outcome_of(199), Outcome::failure);
  EXPECT_EQ(outcome_of(200), Outcome::error);
  EXPECT_EQ(outcome_of(255), Outcome::error);
}
