#include <doctest.h>

#include <random>

#include "choiceleak/error.hpp"
#include "choiceleak/profile.hpp"
#include "choiceleak/tls.hpp"
#include "choiceleak/trace.hpp"
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

TlsRecord rec(std::uint64_t t, Direction d, std::uint16_t len, std::uint8_t ctype = 23) { return {t, d, ctype, len}; }

}  // namespace

TEST_CASE("extract_tls_records: framing examples") {
  std::mt19937_64 rng(1);
  SUBCASE("empty stream") {
    const auto r = extract_tls_records({}, ByteTimeline(0));
    CHECK(r.records.empty());
    CHECK(r.consumed == 0);
    CHECK(r.residue == 0);
  }
  SUBCASE("two back-to-back records") {
    auto bytes = testkit::frame_record(23, 100, rng);
    const auto second = testkit::frame_record(23, 200, rng);
    bytes.insert(bytes.end(), second.begin(), second.end());
    REQUIRE(bytes.size() == 310);
    const auto r = extract_tls_records(bytes, ByteTimeline(7));
    REQUIRE(r.records.size() == 2);
    CHECK(r.records[0].len == 100);
    CHECK(r.records[1].len == 200);
    CHECK(r.records[0].t_us == 7);
    CHECK(r.residue == 0);
  }
  SUBCASE("record cut mid-payload is residue") {
    auto bytes = testkit::frame_record(23, 40, rng);
    bytes.resize(5 + 17);
    const auto r = extract_tls_records(bytes, ByteTimeline(0));
    CHECK(r.records.empty());
    CHECK(r.residue == 5 + 17);
  }
  SUBCASE("short header is residue") {
    const testkit::Bytes bytes{23, 3, 3};
    const auto r = extract_tls_records(bytes, ByteTimeline(0));
    CHECK(r.records.empty());
    CHECK(r.residue == 3);
    CHECK_FALSE(r.invalid_offset);
  }
  SUBCASE("invalid content type stops at the boundary") {
    auto bytes = testkit::frame_record(22, 10, rng);
    const auto bad = testkit::frame_record(99, 10, rng);
    bytes.insert(bytes.end(), bad.begin(), bad.end());
    const auto r = extract_tls_records(bytes, ByteTimeline(0));
    CHECK(r.records.size() == 1);
    REQUIRE(r.invalid_offset);
    CHECK(*r.invalid_offset == 15);
    CHECK(r.consumed + r.residue == bytes.size());
  }
  SUBCASE("oversized length field is rejected") {
    const testkit::Bytes bytes{23, 3, 3, 0x40, 0x01};
    const auto r = extract_tls_records(bytes, ByteTimeline(0));
    CHECK(r.invalid_offset == std::optional<std::size_t>{0});
  }
}

TEST_CASE("ByteTimeline stamps each record with its first header byte") {
  std::mt19937_64 rng(2);
  auto bytes = testkit::frame_record(23, 10, rng);
  const auto second = testkit::frame_record(23, 10, rng);
  bytes.insert(bytes.end(), second.begin(), second.end());
  ByteTimeline tl;
  tl.mark(0, 100);
  tl.mark(15, 200);  // second header starts here
  tl.mark(17, 300);
  const auto r = extract_tls_records(bytes, tl);
  REQUIRE(r.records.size() == 2);
  CHECK(r.records[0].t_us == 100);
  CHECK(r.records[1].t_us == 200);
}

TEST_CASE("property: framing conservation") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 300; ++i) {
    const auto f = testkit::random_stream(rng);
    const auto r = extract_tls_records(f.bytes, ByteTimeline(0));
    std::size_t sum = 0;
    for (const auto& x : r.records) sum += 5 + x.len;
    CHECK(sum + r.residue == f.bytes.size());
    CHECK(r.consumed == sum);
    CHECK(r.residue == f.residue);
    REQUIRE(r.records.size() == f.records.size());
    for (std::size_t k = 0; k < r.records.size(); ++k) {
      CHECK(r.records[k].ctype == f.records[k].first);
      CHECK(r.records[k].len == f.records[k].second);
    }
  }
}

TEST_CASE("trace JSONL") {
  Trace t;
  t.meta.trace_id = "t1";
  t.meta.origin = Origin::Synthetic;
  t.meta.profile = OperationalProfile{Os::Linux, Platform::Desktop, TrafficCondition::Night, Connection::Wired,
                                      Browser::Firefox, undisclosed_behavior()};

  SUBCASE("empty record list is a header line only") {
    const std::string text = write_trace(t);
    CHECK(std::count(text.begin(), text.end(), '\n') == 1);
    CHECK(read_trace(text) == t);
    CHECK(write_trace(read_trace(text)) == text);
  }
  SUBCASE("equal timestamps keep their order") {
    t.records = {rec(5, Direction::ClientToServer, 3), rec(5, Direction::ServerToClient, 1),
                 rec(5, Direction::ClientToServer, 2, 22)};
    const std::string text = write_trace(t);
    const Trace back = read_trace(text);
    CHECK(back == t);
    CHECK(write_trace(back) == text);
  }
  SUBCASE("decreasing timestamps") {
    const std::string text = write_trace(t) + R"({"t_us":5,"dir":"c2s","ctype":23,"len":1})" + "\n" +
                             R"({"t_us":3,"dir":"c2s","ctype":23,"len":1})" + "\n";
    CHECK(code_of([&] { read_trace(text); }) == Errc::OrderViolation);
  }
  SUBCASE("malformed input") {
    CHECK(code_of([] { read_trace(""); }) == Errc::ParseError);
    CHECK(code_of([] { read_trace("[1,2]\n"); }) == Errc::ParseError);
    const std::string head = write_trace(t);
    CHECK(code_of([&] { read_trace(head + R"({"t_us":1,"dir":"up","ctype":23,"len":1})" "\n"); }) ==
          Errc::ParseError);
    CHECK(code_of([&] { read_trace(head + R"({"t_us":1,"dir":"c2s","ctype":24,"len":1})" "\n"); }) ==
          Errc::ParseError);
    CHECK(code_of([&] { read_trace(head + R"({"t_us":1,"dir":"c2s","ctype":23,"len":16385})" "\n"); }) ==
          Errc::ParseError);
    CHECK(code_of([&] { read_trace(head + "{\"t_us\":1,\n"); }) == Errc::ParseError);
    CHECK(code_of([] { read_trace(R"({"trace_id":"","origin":"Synthetic","profile":null})" "\n"); }) ==
          Errc::ParseError);
  }
  SUBCASE("blank lines and CRLF are tolerated") {
    t.records = {rec(1, Direction::ClientToServer, 9)};
    std::string text = write_trace(t);
    std::string crlf;
    for (char c : text) crlf += c == '\n' ? std::string("\r\n") : std::string(1, c);
    CHECK(read_trace(crlf + "\n\n") == t);
  }
  SUBCASE("captured trace without a profile") {
    t.meta.profile.reset();
    t.meta.origin = Origin::Captured;
    t.meta.connections = 2;
    t.meta.reassembly_gaps = 1;
    CHECK(read_trace(write_trace(t)) == t);
  }
}

TEST_CASE("property: trace round-trip is byte-stable") {
  std::mt19937_64 rng(4);
  const auto profiles = default_profiles();
  for (int i = 0; i < 100; ++i) {
    Trace t;
    t.meta.trace_id = "r" + std::to_string(i);
    t.meta.profile = profiles[rng() % profiles.size()];
    std::uint64_t now = 0;
    const std::size_t n = rng() % 50;
    for (std::size_t k = 0; k < n; ++k) {
      now += rng() % 3;  // ties included
      t.records.push_back({now, rng() % 2 ? Direction::ClientToServer : Direction::ServerToClient,
                           static_cast<std::uint8_t>(20 + rng() % 4), static_cast<std::uint16_t>(rng() % 16385)});
    }
    const std::string text = write_trace(t);
    const Trace back = read_trace(text);
    CHECK(back == t);
    CHECK(write_trace(back) == text);
  }
}

TEST_CASE("client_record_lengths") {
  Trace t;
  t.meta.trace_id = "x";
  SUBCASE("only server records") {
    t.records = {rec(1, Direction::ServerToClient, 1400)};
    CHECK(client_record_lengths(t).empty());
  }
  SUBCASE("mixed") {
    t.records = {rec(1, Direction::ClientToServer, 300), rec(2, Direction::ServerToClient, 1400),
                 rec(3, Direction::ClientToServer, 50, 22), rec(4, Direction::ClientToServer, 710)};
    const auto l = client_record_lengths(t);
    REQUIRE(l.size() == 2);
    CHECK(l[0] == LengthSample{1, 300});
    CHECK(l[1] == LengthSample{4, 710});
  }
}
