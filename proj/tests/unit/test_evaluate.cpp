#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "choiceleak/corpus.hpp"
#include "choiceleak/error.hpp"
#include "choiceleak/evaluate.hpp"
#include "choiceleak/report.hpp"
#include "fixtures.hpp"

using namespace choiceleak;
namespace fs = std::filesystem;

namespace {

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return Errc::Io;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = slurp(e.path());
  return out;
}

}  // namespace

TEST_CASE("build_corpus") {
  const auto g = testkit::two_question_graph();
  SUBCASE("writes one entry per session") {
    const auto dir = testkit::scratch_dir("corpus-a");
    const auto m = build_corpus(g, 12, 5, SideChannelModel{}, dir);
    CHECK(m.entries.size() == 12);
    CHECK(fs::exists(dir / "manifest.json"));
    CHECK(fs::exists(dir / "script.json"));
    const auto back = load_manifest(dir / "manifest.json");
    CHECK(back.entries == m.entries);
    CHECK(back.name == "synthetic");
    CHECK(back.load_script() == g);
    const auto s = back.load_session(3);
    CHECK(s.trace.meta.trace_id == "session-0003");
    CHECK(s.trace.meta.profile == default_profiles()[3]);
    CHECK(code_of([&] { back.load_session(12); }) == Errc::ValidationError);
  }
  SUBCASE("same seed, same bytes") {
    const auto a = testkit::scratch_dir("corpus-b1");
    const auto b = testkit::scratch_dir("corpus-b2");
    build_corpus(g, 1, 99, SideChannelModel{}, a);
    build_corpus(g, 1, 99, SideChannelModel{}, b);
    CHECK(tree(a) == tree(b));
  }
  SUBCASE("zero sessions") {
    CHECK(code_of([&] { build_corpus(g, 0, 1, SideChannelModel{}, testkit::scratch_dir("corpus-c")); }) ==
          Errc::ValidationError);
  }
  SUBCASE("invalid graph") {
    ScriptGraph bad = g;
    bad.choices[0].alt_next = "nowhere";
    CHECK(code_of([&] { simulate_corpus(bad, 3, 1, SideChannelModel{}); }) == Errc::ValidationError);
  }
  SUBCASE("paths cover the graph") {
    const auto sessions = simulate_corpus(g, 60, 2, SideChannelModel{});
    std::set<ChoicePath> seen;
    for (const auto& s : sessions) seen.insert(s.truth.path);
    CHECK(seen.size() == 4);
  }
}

TEST_CASE("manifest JSON") {
  DatasetManifest m;
  m.name = "tiny";
  m.script_path = "g.json";
  m.entries.push_back({"t/a.jsonl", "u/a.json", default_profiles()[5]});
  const std::string text = manifest_to_json(m);
  const auto back = manifest_from_json(text, "/data");
  CHECK(back.entries == m.entries);
  CHECK(back.resolve("t/a.jsonl") == fs::path("/data/t/a.jsonl"));
  std::string wrong = text;
  wrong.replace(wrong.find("\"count\": 1"), 10, "\"count\": 2");
  CHECK(code_of([&] { manifest_from_json(wrong, "."); }) == Errc::ValidationError);
  CHECK(code_of([] { manifest_from_json("{\"name\":\"x\"}", "."); }) == Errc::ParseError);
  CHECK(code_of([] { load_manifest("/nonexistent/manifest.json"); }) == Errc::Io);
}

TEST_CASE("evaluate_pipeline") {
  const auto g = testkit::five_question_graph();
  SUBCASE("noiseless corpus is perfect") {
    const auto sessions = simulate_corpus(g, 20, 4, SideChannelModel::noiseless());
    const auto m = evaluate_pipeline(sessions, g, 0.1);
    CHECK(m.per_event_accuracy == 1.0);
    CHECK(m.per_choice_accuracy == 1.0);
    CHECK(m.path_exact_rate == 1.0);
    CHECK(m.spurious_events == 0);
    CHECK(m.sessions == 18);
  }
  SUBCASE("split sizes") {
    CHECK(calibration_count(100, 0.1) == 10);
    CHECK(calibration_count(10, 0.15) == 2);
    CHECK(calibration_count(3, 0.5) == 2);
    const auto one = simulate_corpus(g, 1, 4, SideChannelModel{});
    CHECK(code_of([&] { evaluate_pipeline(one, g, 0.1); }) == Errc::EmptySplit);
    const auto two = simulate_corpus(g, 2, 4, SideChannelModel{});
    CHECK(code_of([&] { evaluate_pipeline(two, g, 0.99); }) == Errc::EmptySplit);
    CHECK(code_of([&] { evaluate_pipeline(two, g, 0.0); }) == Errc::ValidationError);
  }
  SUBCASE("calibration without Type2 labels") {
    std::vector<Session> s;
    for (int i = 0; i < 5; ++i)
      s.push_back(simulate_session(g, parse_path("Q1=D,Q2=D,Q3=D,Q4=D,Q5=D"), {}, SideChannelModel{}, i));
    CHECK(code_of([&] { evaluate_pipeline(s, g, 0.2); }) == Errc::InsufficientLabels);
  }
  SUBCASE("metric invariants and determinism on the default model") {
    const auto sessions = simulate_corpus(g, 40, 8, SideChannelModel{});
    const auto m = evaluate_pipeline(sessions, g, 0.1);
    CHECK(m == evaluate_pipeline(simulate_corpus(g, 40, 8, SideChannelModel{}), g, 0.1));
    for (double r : {m.per_event_accuracy, m.per_choice_accuracy, m.path_exact_rate, m.event_precision}) {
      CHECK(r >= 0.0);
      CHECK(r <= 1.0);
    }
    std::uint64_t total = 0;
    for (const auto& row : m.confusion)
      for (auto c : row) total += c;
    CHECK(total == m.matched_events);
    CHECK(m.per_event_accuracy >= 0.9);
    if (m.path_exact_rate == 1.0) CHECK(m.per_choice_accuracy == 1.0);
  }
  SUBCASE("aggregation does not depend on order") {
    const auto sessions = simulate_corpus(g, 15, 9, SideChannelModel{});
    const LengthBands bands{{702, 720}, {902, 920}};
    std::vector<SessionScore> scores;
    for (const auto& s : sessions) scores.push_back(score_session(s, bands, g));
    const auto forward = aggregate(scores);
    std::reverse(scores.begin(), scores.end());
    CHECK(aggregate(scores) == forward);
    CHECK(evaluate_sessions(sessions, bands, g) == forward);
  }
}

TEST_CASE("evaluate_pipeline through a manifest") {
  const auto g = testkit::five_question_graph();
  const auto dir = testkit::scratch_dir("eval-manifest");
  const auto m = build_corpus(g, 20, 6, SideChannelModel{}, dir);
  const auto from_disk = evaluate_pipeline(load_manifest(dir / "manifest.json"), 0.1);
  CHECK(from_disk == evaluate_pipeline(simulate_corpus(g, 20, 6, SideChannelModel{}), g, 0.1));
  (void)m;
}

TEST_CASE("emit_report") {
  Metrics all_one;
  all_one.sessions = 3;
  SUBCASE("metrics only") {
    const auto dir = testkit::scratch_dir("report-a");
    const auto files = emit_report(all_one, {}, dir);
    CHECK(files.size() == 2);
    const std::string j = slurp(dir / "metrics.json");
    CHECK(j.find("\"per_event_accuracy\": 1.0") != std::string::npos);
    CHECK(j.find("per_event_accuracy") < j.find("per_choice_accuracy"));
    CHECK(j.find("per_choice_accuracy") < j.find("path_exact_rate"));
    CHECK(slurp(dir / "confusion.csv") == "truth,Type1,Type2\nType1,0,0\nType2,0,0\n");
  }
  SUBCASE("one CSV per profile") {
    const auto dir = testkit::scratch_dir("report-b");
    const auto p = default_profiles();
    std::vector<ProfileHistogram> h{{p[0], {{710, 2}}}, {p[1], {{910, 1}}}};
    const auto files = emit_report(all_one, h, dir / "nested");
    CHECK(files.size() == 4);
    CHECK(slurp(dir / "nested" / "hist_Windows_Desktop_Morning_Wired_Chrome.csv") == "bin,count\n710,2\n");
    CHECK(fs::exists(dir / "nested" / "hist_Windows_Desktop_Morning_Wired_Firefox.csv"));
  }
  SUBCASE("unwritable destination") {
    const auto dir = testkit::scratch_dir("report-c");
    std::ofstream(dir / "file") << "x";
    CHECK(code_of([&] { emit_report(all_one, {}, dir / "file" / "sub"); }) == Errc::Io);
  }
  SUBCASE("profile histograms group by profile") {
    const auto dir = testkit::scratch_dir("report-d");
    const auto m = build_corpus(testkit::two_question_graph(), 74, 1, SideChannelModel{}, dir);
    const auto h = profile_histograms(m, 10);
    CHECK(h.size() == 72);
    std::uint64_t total = 0;
    for (const auto& [bin, n] : h[0].histogram) total += n;
    std::uint64_t expect = 0;
    for (std::size_t i : {std::size_t{0}, std::size_t{72}})
      expect += client_record_lengths(m.load_session(i).trace).size();
    CHECK(total == expect);
  }
}

TEST_CASE("defense report JSON") {
  const auto g = testkit::two_question_graph();
  const auto sessions = simulate_corpus(g, 40, 2, SideChannelModel{});
  const auto r = evaluate_defense(sessions, g, DefensePolicy::pad_fixed(1024), {{702, 720}, {902, 920}}, 0.25);
  const std::string j = defense_report_to_json(r);
  CHECK(j.find("\"inseparable_bands\": true") != std::string::npos);
  CHECK(j.find("\"recalibrated_bands\": null") != std::string::npos);
  CHECK(j.find("\"kind\": \"PadFixed\"") != std::string::npos);
  const auto dir = testkit::scratch_dir("defense-report");
  CHECK(slurp(emit_defense_report(r, dir)) == j);
}
