#pragma once

// Test-side oracles and builders. Nothing here calls into the library code it
// is used to check: the pcap writer, the record framer and the path counter
// are written from the file-format and graph definitions directly.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "choiceleak/script_graph.hpp"
#include "choiceleak/tls.hpp"

namespace testkit {

using Bytes = std::vector<std::uint8_t>;

/// Two chained questions where both branches of Q1 lead to Q2.
inline choiceleak::ScriptGraph two_question_graph() { return choiceleak::make_chain_script(2, 20000, 250); }

inline choiceleak::ScriptGraph five_question_graph() { return choiceleak::make_chain_script(5, 20000, 250); }

/// Brute-force path count by direct recursion on the choice map.
inline std::size_t count_paths(const choiceleak::ScriptGraph& g, const std::string& seg, std::size_t depth,
                               std::size_t max_depth) {
  const choiceleak::ChoicePoint* cp = nullptr;
  for (const auto& c : g.choices)
    if (c.after_segment == seg) cp = &c;
  if (cp == nullptr || depth == max_depth) return 1;
  return count_paths(g, cp->default_next, depth + 1, max_depth) + count_paths(g, cp->alt_next, depth + 1, max_depth);
}

/// One TLS record: header plus `len` filler bytes.
inline Bytes frame_record(std::uint8_t ctype, std::uint16_t len, std::mt19937_64& rng) {
  Bytes b{ctype, 0x03, 0x03, static_cast<std::uint8_t>(len >> 8), static_cast<std::uint8_t>(len & 0xff)};
  for (std::uint16_t i = 0; i < len; ++i) b.push_back(static_cast<std::uint8_t>(rng()));
  return b;
}

struct StreamFixture {
  Bytes bytes;
  std::vector<std::pair<std::uint8_t, std::uint16_t>> records;  ///< (ctype, len) as framed
  std::size_t residue = 0;
};

/// Random run of valid records, optionally followed by a truncated record.
inline StreamFixture random_stream(std::mt19937_64& rng, std::size_t max_records = 12, std::uint16_t max_len = 2000) {
  StreamFixture f;
  const std::size_t n = std::uniform_int_distribution<std::size_t>(0, max_records)(rng);
  for (std::size_t i = 0; i < n; ++i) {
    const auto ctype = static_cast<std::uint8_t>(std::uniform_int_distribution<int>(20, 23)(rng));
    const auto len = static_cast<std::uint16_t>(std::uniform_int_distribution<int>(0, max_len)(rng));
    const Bytes r = frame_record(ctype, len, rng);
    f.bytes.insert(f.bytes.end(), r.begin(), r.end());
    f.records.emplace_back(ctype, len);
  }
  if (rng() % 2 == 0) {
    const auto len = static_cast<std::uint16_t>(std::uniform_int_distribution<int>(1, max_len)(rng));
    const Bytes r = frame_record(23, len, rng);
    const std::size_t keep = std::uniform_int_distribution<std::size_t>(1, r.size() - 1)(rng);
    f.bytes.insert(f.bytes.end(), r.begin(), r.begin() + static_cast<std::ptrdiff_t>(keep));
    f.residue = keep;
  }
  return f;
}

/// Random cut points: returns [begin, end) pieces covering `size` bytes.
inline std::vector<std::pair<std::size_t, std::size_t>> random_cuts(std::size_t size, std::mt19937_64& rng,
                                                                    std::size_t max_piece = 1500) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t at = 0;
  while (at < size) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(1, std::min(max_piece, size - at))(rng);
    out.emplace_back(at, at + n);
    at += n;
  }
  return out;
}

inline void put16be(Bytes& b, std::uint16_t v) {
  b.push_back(static_cast<std::uint8_t>(v >> 8));
  b.push_back(static_cast<std::uint8_t>(v));
}
inline void put32be(Bytes& b, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) b.push_back(static_cast<std::uint8_t>(v >> s));
}
inline void put32le(Bytes& b, std::uint32_t v) {
  for (int s = 0; s < 32; s += 8) b.push_back(static_cast<std::uint8_t>(v >> s));
}
inline void put16le(Bytes& b, std::uint16_t v) {
  b.push_back(static_cast<std::uint8_t>(v));
  b.push_back(static_cast<std::uint8_t>(v >> 8));
}

inline std::uint32_t ip(std::uint8_t a, std::uint8_t b, std::uint8_t c, std::uint8_t d) {
  return (std::uint32_t{a} << 24) | (std::uint32_t{b} << 16) | (std::uint32_t{c} << 8) | d;
}

namespace tcp_flag {
inline constexpr std::uint8_t kFin = 0x01;
inline constexpr std::uint8_t kSyn = 0x02;
inline constexpr std::uint8_t kPsh = 0x08;
inline constexpr std::uint8_t kAck = 0x10;
}  // namespace tcp_flag

/// Little-endian microsecond pcap with Ethernet or raw-IPv4 frames.
class PcapBuilder {
 public:
  explicit PcapBuilder(std::uint32_t linktype = 1, std::uint32_t magic = 0xa1b2c3d4) : linktype_(linktype) {
    put32le(out_, magic);
    put16le(out_, 2);
    put16le(out_, 4);
    put32le(out_, 0);
    put32le(out_, 0);
    put32le(out_, 65535);
    put32le(out_, linktype);
  }

  void tcp(std::uint64_t t_us, std::uint32_t src, std::uint16_t sport, std::uint32_t dst, std::uint16_t dport,
           std::uint32_t seq, std::uint8_t flags, const Bytes& payload = {}) {
    Bytes l4;
    put16be(l4, sport);
    put16be(l4, dport);
    put32be(l4, seq);
    put32be(l4, 0);
    l4.push_back(0x50);
    l4.push_back(flags);
    put16be(l4, 65535);
    put16be(l4, 0);
    put16be(l4, 0);
    l4.insert(l4.end(), payload.begin(), payload.end());
    packet(t_us, src, dst, 6, l4);
  }

  void udp(std::uint64_t t_us, std::uint32_t src, std::uint16_t sport, std::uint32_t dst, std::uint16_t dport,
           const Bytes& payload) {
    Bytes l4;
    put16be(l4, sport);
    put16be(l4, dport);
    put16be(l4, static_cast<std::uint16_t>(8 + payload.size()));
    put16be(l4, 0);
    l4.insert(l4.end(), payload.begin(), payload.end());
    packet(t_us, src, dst, 17, l4);
  }

  const Bytes& bytes() const { return out_; }

 private:
  void packet(std::uint64_t t_us, std::uint32_t src, std::uint32_t dst, std::uint8_t proto, const Bytes& l4) {
    Bytes frame;
    if (linktype_ == 1) {
      for (int i = 0; i < 12; ++i) frame.push_back(static_cast<std::uint8_t>(i));
      put16be(frame, 0x0800);
    }
    frame.push_back(0x45);
    frame.push_back(0);
    put16be(frame, static_cast<std::uint16_t>(20 + l4.size()));
    put16be(frame, 0);
    put16be(frame, 0x4000);
    frame.push_back(64);
    frame.push_back(proto);
    put16be(frame, 0);
    put32be(frame, src);
    put32be(frame, dst);
    frame.insert(frame.end(), l4.begin(), l4.end());

    put32le(out_, static_cast<std::uint32_t>(t_us / 1000000));
    put32le(out_, static_cast<std::uint32_t>(t_us % 1000000));
    put32le(out_, static_cast<std::uint32_t>(frame.size()));
    put32le(out_, static_cast<std::uint32_t>(frame.size()));
    out_.insert(out_.end(), frame.begin(), frame.end());
  }

  std::uint32_t linktype_;
  Bytes out_;
};

/// Writes `stream` as client-to-server TCP segments cut at random points, in
/// stream order, with some segments retransmitted later in the capture.
/// Delivery stays in order so every record keeps the time of its first
/// header byte monotone; out-of-order arrival is covered separately.
inline Bytes resegmented_capture(const Bytes& stream, std::mt19937_64& rng, std::uint32_t isn = 1000) {
  const std::uint32_t client = ip(192, 168, 1, 20);
  const std::uint32_t server = ip(198, 51, 100, 7);
  PcapBuilder b;
  b.tcp(0, client, 40000, server, 443, isn, tcp_flag::kSyn);
  b.tcp(10, server, 443, client, 40000, 77, tcp_flag::kSyn | tcp_flag::kAck);
  const auto cuts = random_cuts(stream.size(), rng);
  std::vector<std::pair<std::size_t, std::size_t>> order;
  for (std::size_t i = 0; i < cuts.size(); ++i) {
    order.push_back(cuts[i]);
    if (rng() % 8 == 0) order.push_back(cuts[std::uniform_int_distribution<std::size_t>(0, i)(rng)]);
  }
  std::uint64_t t = 100;
  for (const auto& [lo, hi] : order) {
    Bytes payload(stream.begin() + static_cast<std::ptrdiff_t>(lo), stream.begin() + static_cast<std::ptrdiff_t>(hi));
    b.tcp(t, client, 40000, server, 443, isn + 1 + static_cast<std::uint32_t>(lo), tcp_flag::kAck | tcp_flag::kPsh,
          payload);
    t += 10;
  }
  return b.bytes();
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("choiceleak-test-" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace testkit
