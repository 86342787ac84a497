#include <doctest.h>

#include <random>

#include "choiceleak/classifier.hpp"
#include "choiceleak/corpus.hpp"
#include "choiceleak/error.hpp"
#include "choiceleak/evaluate.hpp"
#include "choiceleak/simulator.hpp"
#include "fixtures.hpp"

using namespace choiceleak;

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

Trace client_trace(const std::vector<std::uint16_t>& lens) {
  Trace t;
  t.meta.trace_id = "c";
  std::uint64_t now = 0;
  for (auto l : lens) t.records.push_back({now += 10, Direction::ClientToServer, 23, l});
  return t;
}

const LengthBands kNarrow{{709, 711}, {909, 911}};

}  // namespace

TEST_CASE("calibrate_bands: examples") {
  SUBCASE("single samples get a one-unit margin") {
    const auto b = calibrate_bands(ControlSamples{{710}, {910}});
    CHECK(b.type1 == LengthInterval{709, 711});
    CHECK(b.type2 == LengthInterval{909, 911});
  }
  SUBCASE("padded lengths are inseparable") {
    CHECK(code_of([] { calibrate_bands(ControlSamples{{1000, 1000, 1000}, {1000, 1000}}); }) ==
          Errc::InseparableBands);
  }
  SUBCASE("missing kind") {
    CHECK(code_of([] { calibrate_bands(ControlSamples{{710}, {}}); }) == Errc::InsufficientLabels);
    CHECK(code_of([] { calibrate_bands(ControlSamples{{}, {}}); }) == Errc::InsufficientLabels);
  }
  SUBCASE("outliers are trimmed by the percentile shrink") {
    ControlSamples s;
    s.type1.assign(99, 700);
    s.type1.push_back(905);
    s.type2.assign(99, 910);
    s.type2.push_back(900);
    const auto b = calibrate_bands(s);
    CHECK(b.valid());
    CHECK(b.type1 == LengthInterval{700, 700});
    CHECK(b.type2 == LengthInterval{900, 910});
  }
  SUBCASE("simulated corpus gives disjoint bands around the control centers") {
    const auto sessions = simulate_corpus(testkit::two_question_graph(), 100, 17, SideChannelModel{});
    const auto b = calibrate_bands(sessions);
    CHECK(b.valid());
    CHECK(b.type1.contains(710));
    CHECK(b.type2.contains(910));
    CHECK(b.type1.hi < b.type2.lo);
    CHECK(b.type1.hi - b.type1.lo <= 2 * 8 + 2 + 2);  // jitter support plus Firefox shift plus margins
  }
}

TEST_CASE("property: calibrate_bands never returns overlapping bands") {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 300; ++i) {
    ControlSamples s;
    const std::size_t n1 = 1 + rng() % 30;
    const std::size_t n2 = 1 + rng() % 30;
    const int c1 = 500 + static_cast<int>(rng() % 400);
    const int c2 = 500 + static_cast<int>(rng() % 400);
    for (std::size_t k = 0; k < n1; ++k) s.type1.push_back(c1 + static_cast<int>(rng() % 60) - 30);
    for (std::size_t k = 0; k < n2; ++k) s.type2.push_back(c2 + static_cast<int>(rng() % 60) - 30);
    try {
      const auto b = calibrate_bands(s);
      CHECK(b.valid());
    } catch (const Error& e) {
      CHECK(e.code() == Errc::InseparableBands);
    }
  }
}

TEST_CASE("classify_events: examples") {
  const LengthBands wide{{702, 718}, {902, 918}};
  SUBCASE("one control record among chunk and bulk sizes") {
    const auto ev = classify_events(client_trace({450, 710, 16384, 1200}), wide);
    REQUIRE(ev.size() == 1);
    CHECK(ev[0].kind == ControlKind::Type1);
    CHECK(ev[0].len == 710);
  }
  SUBCASE("near miss is ignored") {
    const auto ev = classify_events(client_trace({710, 905, 910}), kNarrow);
    REQUIRE(ev.size() == 2);
    CHECK(ev[0].kind == ControlKind::Type1);
    CHECK(ev[1].kind == ControlKind::Type2);
    CHECK(ev[1].len == 910);
  }
  SUBCASE("band edges are inclusive") {
    const auto ev = classify_events(client_trace({708, 709, 711, 712, 909, 911}), kNarrow);
    CHECK(ev.size() == 4);
  }
  SUBCASE("server and handshake records are ignored") {
    Trace t = client_trace({710});
    t.records.push_back({100, Direction::ServerToClient, 23, 910});
    t.records.push_back({200, Direction::ClientToServer, 22, 910});
    CHECK(classify_events(t, kNarrow).size() == 1);
  }
}

TEST_CASE("property: noiseless sessions classify to exactly the truth control events") {
  std::mt19937_64 rng(12);
  const auto g = testkit::five_question_graph();
  const auto paths = enumerate_paths(g, 16);
  const auto profiles = default_profiles();
  for (int i = 0; i < 40; ++i) {
    const auto& profile = profiles[rng() % profiles.size()];
    const auto model = model_for_profile(profile, SideChannelModel::noiseless());
    const auto s = simulate_session(g, paths[rng() % paths.size()], profile, model, rng());
    const auto bands = calibrate_bands(ControlSamples{{model.type1.center}, {model.type2.center}});
    const auto ev = classify_events(s.trace, bands);
    std::vector<ClassifiedEvent> expect;
    for (const auto& e : s.truth.events) {
      if (e.kind == EventKind::Type1 || e.kind == EventKind::Type2) {
        const auto* r = &*std::find_if(s.trace.records.begin(), s.trace.records.end(),
                                       [&](const TlsRecord& x) { return x.t_us == e.t_us; });
        expect.push_back({e.t_us, e.kind == EventKind::Type1 ? ControlKind::Type1 : ControlKind::Type2, r->len});
      }
    }
    if (s.truth.count(EventKind::Type2) == 0) continue;  // calibration needs both kinds
    CHECK(ev == expect);
  }
}

TEST_CASE("property: more jitter never helps the classifier") {
  const auto g = testkit::five_question_graph();
  const auto paths = enumerate_paths(g, 16);
  const LengthBands fixed{{702, 718}, {902, 918}};
  double previous = 2.0;
  for (std::int32_t jitter : {0, 8, 30, 80, 160}) {
    SideChannelModel m;
    m.type1.jitter = jitter;
    m.type2.jitter = jitter;
    std::vector<SessionScore> scores;
    for (std::uint64_t seed = 0; seed < 24; ++seed) {
      const auto s = simulate_session(g, paths[seed % paths.size()], {}, m, 1000 + seed);
      scores.push_back(score_session(s, fixed, g));
    }
    const double acc = aggregate(scores).per_event_accuracy;
    CHECK(acc <= previous + 0.01);
    previous = acc;
  }
  CHECK(previous < 0.5);
}

TEST_CASE("length_histogram") {
  CHECK(length_histogram(Trace{}, 10).empty());
  const auto h = length_histogram(client_trace({710, 711}), 10);
  CHECK(h == Histogram{{710, 2}});
  CHECK(code_of([] { length_histogram(Trace{}, 0); }) == Errc::ValidationError);
  CHECK(histogram_to_csv(h) == "bin,count\n710,2\n");

  const auto s = simulate_session(testkit::five_question_graph(), parse_path("Q1=A,Q2=A,Q3=A,Q4=A,Q5=A"), {},
                                  SideChannelModel{}, 4);
  const auto sh = length_histogram(s.trace, 10);
  std::uint64_t total = 0;
  for (const auto& [bin, n] : sh) total += n;
  CHECK(total == client_record_lengths(s.trace).size());
  auto mass = [&](std::uint32_t lo, std::uint32_t hi) {
    std::uint64_t m = 0;
    for (const auto& [bin, n] : sh)
      if (bin >= lo && bin <= hi) m += n;
    return m;
  };
  CHECK(mass(400, 500) > 100);  // chunk requests
  CHECK(mass(700, 720) >= 5);   // one Type1 per question
  CHECK(mass(900, 920) >= 5);   // one Type2 per Alt
}

TEST_CASE("bands and events JSON") {
  CHECK(bands_to_json(kNarrow) == "{\"type1\":[709,711],\"type2\":[909,911]}\n");
  CHECK(bands_from_json(bands_to_json(kNarrow)) == kNarrow);
  CHECK(code_of([] { bands_from_json(R"({"type1":[1,5],"type2":[4,9]})"); }) == Errc::ValidationError);
  CHECK(code_of([] { bands_from_json(R"({"type1":[1],"type2":[4,9]})"); }) == Errc::ParseError);

  const std::vector<ClassifiedEvent> ev{{5, ControlKind::Type1, 710}, {9, ControlKind::Type2, 910}};
  CHECK(events_from_json(events_to_json(ev, "abc")) == ev);
  CHECK(code_of([] { events_from_json(R"({"events":[{"t_us":1,"kind":"Type3","len":1}]})"); }) ==
        Errc::ParseError);
}
