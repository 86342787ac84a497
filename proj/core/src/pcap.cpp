#include "choiceleak/pcap.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cstring>
#include <map>
#include <tuple>

#include "choiceleak/error.hpp"
#include "json_util.hpp"
#include "rng.hpp"

namespace choiceleak {

namespace {

constexpr std::uint32_t kMagicMicro = 0xa1b2c3d4;
constexpr std::uint32_t kMagicMicroSwapped = 0xd4c3b2a1;
constexpr std::uint32_t kMagicNano = 0xa1b23c4d;
constexpr std::uint32_t kMagicNanoSwapped = 0x4d3cb2a1;
constexpr std::size_t kGlobalHeaderLen = 24;
constexpr std::size_t kPacketHeaderLen = 16;
constexpr std::uint32_t kLinkEthernet = 1;
constexpr std::uint32_t kLinkRaw = 101;
constexpr std::uint32_t kLinkIpv4 = 228;

constexpr std::uint8_t kTcpSyn = 0x02;
constexpr std::uint8_t kTcpPsh = 0x08;
constexpr std::uint8_t kTcpAck = 0x10;

std::uint16_t be16(const std::uint8_t* p) { return static_cast<std::uint16_t>((p[0] << 8) | p[1]); }
std::uint32_t be32(const std::uint8_t* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) | p[3];
}
std::uint32_t le32(const std::uint8_t* p) {
  return (std::uint32_t{p[3]} << 24) | (std::uint32_t{p[2]} << 16) | (std::uint32_t{p[1]} << 8) | p[0];
}

struct TcpSegment {
  std::uint32_t seq = 0;
  std::span<const std::uint8_t> payload;
  std::uint64_t t_us = 0;
  std::size_t index = 0;  // capture order
};

struct HalfStream {
  std::optional<std::uint32_t> syn_seq;
  std::vector<TcpSegment> segments;
};

struct TcpConnection {
  Endpoint first;  // source of the first packet seen
  Endpoint second;
  std::optional<Endpoint> syn_sender;
  HalfStream from_first;
  HalfStream from_second;
};

using ConnKey = std::tuple<std::uint32_t, std::uint16_t, std::uint32_t, std::uint16_t>;

ConnKey key_of(Endpoint a, Endpoint b) {
  if (std::tie(a.addr, a.port) > std::tie(b.addr, b.port)) std::swap(a, b);
  return {a.addr, a.port, b.addr, b.port};
}

struct Reassembled {
  std::vector<std::uint8_t> bytes;
  ByteTimeline times;
  ByteTimeline packet_index;  // capture index of the packet carrying each byte
  bool gap = false;
};

Reassembled reassemble(HalfStream& hs) {
  Reassembled out;
  auto& segs = hs.segments;
  std::erase_if(segs, [](const TcpSegment& s) { return s.payload.empty(); });
  if (segs.empty()) return out;

  std::uint32_t base;
  if (hs.syn_seq) {
    base = *hs.syn_seq + 1;
  } else {
    const std::uint32_t ref = segs.front().seq;
    std::int32_t lowest = 0;
    for (const auto& s : segs) lowest = std::min(lowest, static_cast<std::int32_t>(s.seq - ref));
    base = ref + static_cast<std::uint32_t>(lowest);
  }

  struct Placed {
    std::int64_t offset;
    const TcpSegment* seg;
  };
  std::vector<Placed> placed;
  placed.reserve(segs.size());
  for (const auto& s : segs) {
    const std::int64_t off = static_cast<std::int32_t>(s.seq - base);
    if (off < 0) continue;  // precedes the stream start
    placed.push_back({off, &s});
  }
  std::stable_sort(placed.begin(), placed.end(), [](const Placed& a, const Placed& b) {
    return std::tie(a.offset, a.seg->index) < std::tie(b.offset, b.seg->index);
  });

  std::size_t cursor = 0;
  for (const auto& p : placed) {
    const auto off = static_cast<std::size_t>(p.offset);
    const auto& payload = p.seg->payload;
    if (off > cursor) {
      out.gap = true;
      break;
    }
    const std::size_t overlap = std::min(cursor - off, payload.size());
    if (!std::equal(payload.begin(), payload.begin() + static_cast<std::ptrdiff_t>(overlap),
                    out.bytes.begin() + static_cast<std::ptrdiff_t>(off))) {
      throw Error(Errc::ReassemblyConflict,
                  "retransmitted bytes at stream offset " + std::to_string(off) + " differ from the first copy");
    }
    if (overlap == payload.size()) continue;
    out.times.mark(cursor, p.seg->t_us);
    out.packet_index.mark(cursor, p.seg->index);
    out.bytes.insert(out.bytes.end(), payload.begin() + static_cast<std::ptrdiff_t>(overlap), payload.end());
    cursor = out.bytes.size();
  }
  return out;
}

class CaptureReader {
 public:
  explicit CaptureReader(std::span<const std::uint8_t> data) : data_(data) {
    if (data_.size() < 4) throw Error(Errc::TruncatedCapture, "capture shorter than the pcap magic");
    const std::uint32_t magic = le32(data_.data());
    switch (magic) {
      case kMagicMicro: break;
      case kMagicMicroSwapped: big_endian_ = true; break;
      case kMagicNano: nano_ = true; break;
      case kMagicNanoSwapped: big_endian_ = nano_ = true; break;
      default: throw Error(Errc::BadMagic, "not a classic pcap file");
    }
    if (data_.size() < kGlobalHeaderLen) throw Error(Errc::TruncatedCapture, "global header is incomplete");
    linktype_ = u32(data_.data() + 20) & 0x0FFFFFFF;
    if (linktype_ != kLinkEthernet && linktype_ != kLinkRaw && linktype_ != kLinkIpv4)
      throw Error(Errc::ParseError, "unsupported link type " + std::to_string(linktype_));
    pos_ = kGlobalHeaderLen;
  }

  std::uint32_t linktype() const { return linktype_; }

  /// Returns false at a clean end of file.
  bool next(std::uint64_t& t_us, std::span<const std::uint8_t>& frame) {
    if (pos_ == data_.size()) return false;
    if (data_.size() - pos_ < kPacketHeaderLen)
      throw Error(Errc::TruncatedCapture, "packet header cut at byte " + std::to_string(pos_));
    const std::uint8_t* h = data_.data() + pos_;
    const std::uint64_t sec = u32(h);
    const std::uint64_t frac = u32(h + 4);
    const std::uint32_t incl = u32(h + 8);
    pos_ += kPacketHeaderLen;
    if (data_.size() - pos_ < incl)
      throw Error(Errc::TruncatedCapture, "packet body cut at byte " + std::to_string(pos_));
    t_us = sec * 1000000ULL + (nano_ ? frac / 1000 : frac);
    frame = data_.subspan(pos_, incl);
    pos_ += incl;
    return true;
  }

 private:
  std::uint32_t u32(const std::uint8_t* p) const { return big_endian_ ? be32(p) : le32(p); }

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
  bool big_endian_ = false;
  bool nano_ = false;
  std::uint32_t linktype_ = 0;
};

struct TcpPacket {
  Endpoint src;
  Endpoint dst;
  std::uint32_t seq = 0;
  std::uint8_t flags = 0;
  std::span<const std::uint8_t> payload;
};

std::optional<TcpPacket> decode_tcp(std::span<const std::uint8_t> frame, std::uint32_t linktype) {
  if (linktype == kLinkEthernet) {
    if (frame.size() < 14) return std::nullopt;
    std::size_t off = 12;
    std::uint16_t ethertype = be16(frame.data() + off);
    while ((ethertype == 0x8100 || ethertype == 0x88a8) && frame.size() >= off + 6) {
      off += 4;
      ethertype = be16(frame.data() + off);
    }
    if (ethertype != 0x0800) return std::nullopt;
    frame = frame.subspan(off + 2);
  }
  if (frame.size() < 20 || (frame[0] >> 4) != 4) return std::nullopt;
  const std::size_t ihl = static_cast<std::size_t>(frame[0] & 0x0F) * 4;
  const std::size_t total = be16(frame.data() + 2);
  if (ihl < 20 || total < ihl || frame.size() < ihl) return std::nullopt;
  if (frame[9] != 6) return std::nullopt;
  const std::uint16_t frag = be16(frame.data() + 6);
  if ((frag & 0x2000) != 0 || (frag & 0x1FFF) != 0) return std::nullopt;  // fragments are not reassembled

  TcpPacket pkt;
  pkt.src.addr = be32(frame.data() + 12);
  pkt.dst.addr = be32(frame.data() + 16);
  auto ip_payload = frame.subspan(ihl, std::min(total, frame.size()) - ihl);
  if (ip_payload.size() < 20) return std::nullopt;
  const std::size_t doff = static_cast<std::size_t>(ip_payload[12] >> 4) * 4;
  if (doff < 20 || doff > ip_payload.size()) return std::nullopt;
  pkt.src.port = be16(ip_payload.data());
  pkt.dst.port = be16(ip_payload.data() + 2);
  pkt.seq = be32(ip_payload.data() + 4);
  pkt.flags = ip_payload[13];
  pkt.payload = ip_payload.subspan(doff);
  return pkt;
}

bool matches(const Endpoint& e, const Endpoint& selector) {
  return e.addr == selector.addr && (selector.port == 0 || e.port == selector.port);
}

}  // namespace

std::optional<std::uint32_t> parse_ipv4(std::string_view text) {
  std::uint32_t addr = 0;
  for (int i = 0; i < 4; ++i) {
    unsigned octet = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), octet);
    if (ec != std::errc{} || octet > 255 || ptr == text.data()) return std::nullopt;
    addr = (addr << 8) | octet;
    text.remove_prefix(static_cast<std::size_t>(ptr - text.data()));
    if (i < 3) {
      if (text.empty() || text.front() != '.') return std::nullopt;
      text.remove_prefix(1);
    }
  }
  if (!text.empty()) return std::nullopt;
  return addr;
}

std::string format_ipv4(std::uint32_t addr) {
  return std::to_string(addr >> 24) + "." + std::to_string((addr >> 16) & 0xFF) + "." +
         std::to_string((addr >> 8) & 0xFF) + "." + std::to_string(addr & 0xFF);
}

ClientSelector ClientSelector::first_syn_sender() { return ClientSelector{}; }

ClientSelector ClientSelector::endpoint(std::uint32_t addr, std::uint16_t port) {
  ClientSelector s;
  s.fixed_ = Endpoint{addr, port};
  return s;
}

ClientSelector ClientSelector::parse(std::string_view text) {
  if (text == "first-syn" || text == "syn") return first_syn_sender();
  std::string_view addr_part = text;
  std::uint16_t port = 0;
  if (auto colon = text.rfind(':'); colon != std::string_view::npos) {
    addr_part = text.substr(0, colon);
    std::string_view port_part = text.substr(colon + 1);
    unsigned p = 0;
    auto [ptr, ec] = std::from_chars(port_part.data(), port_part.data() + port_part.size(), p);
    if (ec != std::errc{} || ptr != port_part.data() + port_part.size() || p > 65535)
      throw Error(Errc::ParseError, "bad client port in '" + std::string(text) + "'");
    port = static_cast<std::uint16_t>(p);
  }
  auto addr = parse_ipv4(addr_part);
  if (!addr) throw Error(Errc::ParseError, "bad client address in '" + std::string(text) + "'");
  return endpoint(*addr, port);
}

Trace ingest_pcap(std::span<const std::uint8_t> capture, const ClientSelector& client, std::string trace_id) {
  CaptureReader reader(capture);

  std::map<ConnKey, TcpConnection> conns;
  std::optional<std::uint64_t> t0;
  std::optional<std::uint32_t> first_syn_addr;
  std::size_t index = 0;

  std::uint64_t t_abs = 0;
  std::span<const std::uint8_t> frame;
  while (reader.next(t_abs, frame)) {
    if (!t0) t0 = t_abs;
    const std::uint64_t t_rel = t_abs >= *t0 ? t_abs - *t0 : 0;
    auto pkt = decode_tcp(frame, reader.linktype());
    ++index;
    if (!pkt) continue;

    auto [it, fresh] = conns.try_emplace(key_of(pkt->src, pkt->dst));
    TcpConnection& c = it->second;
    if (fresh) {
      c.first = pkt->src;
      c.second = pkt->dst;
    }
    HalfStream& hs = pkt->src == c.first ? c.from_first : c.from_second;
    const bool syn = (pkt->flags & kTcpSyn) != 0;
    if (syn) {
      if (!hs.syn_seq) hs.syn_seq = pkt->seq;
      if ((pkt->flags & kTcpAck) == 0) {
        if (!c.syn_sender) c.syn_sender = pkt->src;
        if (!first_syn_addr) first_syn_addr = pkt->src.addr;
      }
    }
    if (!pkt->payload.empty()) {
      // Payload carried on a SYN sits at ISN, one before the first data byte.
      const std::uint32_t seq = syn ? pkt->seq + 1 : pkt->seq;
      hs.segments.push_back({seq, pkt->payload, t_rel, index});
    }
  }

  struct Tagged {
    TlsRecord rec;
    std::size_t packet;  // ties on t_us keep capture order
  };
  std::vector<Tagged> merged;
  std::uint32_t tls_connections = 0;
  std::uint32_t gaps = 0;

  for (auto& [key, c] : conns) {
    bool first_is_client;
    if (client.fixed()) {
      if (matches(c.first, *client.fixed()))
        first_is_client = true;
      else if (matches(c.second, *client.fixed()))
        first_is_client = false;
      else
        continue;
    } else if (first_syn_addr && (c.first.addr == *first_syn_addr) != (c.second.addr == *first_syn_addr)) {
      first_is_client = c.first.addr == *first_syn_addr;
    } else if (c.syn_sender) {
      first_is_client = *c.syn_sender == c.first;
    } else {
      // No handshake in the capture: the ephemeral (higher) port is the client.
      first_is_client = c.first.port >= c.second.port;
    }

    std::size_t produced = 0;
    for (int side = 0; side < 2; ++side) {
      HalfStream& hs = side == 0 ? c.from_first : c.from_second;
      const bool from_client = (side == 0) == first_is_client;
      Reassembled r = reassemble(hs);
      if (r.gap) ++gaps;
      RecordParse parsed = extract_tls_records(r.bytes, r.times,
                                               from_client ? Direction::ClientToServer : Direction::ServerToClient);
      std::size_t offset = 0;
      for (const auto& rec : parsed.records) {
        merged.push_back({rec, static_cast<std::size_t>(r.packet_index.at(offset))});
        offset += kRecordHeaderLen + rec.len;
      }
      produced += parsed.records.size();
    }
    if (produced > 0) ++tls_connections;
  }

  if (merged.empty()) throw Error(Errc::NoTcpPayload, "no TLS records found on any TCP connection");

  std::stable_sort(merged.begin(), merged.end(),
                   [](const Tagged& a, const Tagged& b) {
                     return std::tie(a.rec.t_us, a.packet) < std::tie(b.rec.t_us, b.packet);
                   });

  Trace trace;
  trace.meta.trace_id = std::move(trace_id);
  trace.meta.origin = Origin::Captured;
  trace.meta.connections = tls_connections;
  trace.meta.reassembly_gaps = gaps;
  trace.records.reserve(merged.size());
  for (const auto& m : merged) trace.records.push_back(m.rec);
  return trace;
}

Trace ingest_pcap_file(const std::string& path, const ClientSelector& client) {
  const std::string raw = detail::read_file(path);
  std::string id = path;
  if (auto slash = id.find_last_of('/'); slash != std::string::npos) id = id.substr(slash + 1);
  if (auto dot = id.rfind('.'); dot != std::string::npos && dot > 0) id = id.substr(0, dot);
  if (id.empty()) id = "capture";
  return ingest_pcap(std::span(reinterpret_cast<const std::uint8_t*>(raw.data()), raw.size()), client, id);
}

namespace {

class PcapBuilder {
 public:
  explicit PcapBuilder(const PcapWriteOptions& opt) : opt_(opt) {
    const std::uint32_t magic = opt.nanosecond ? kMagicNano : kMagicMicro;
    put32(magic);
    put16(2);
    put16(4);
    put32(0);
    put32(0);
    put32(262144);
    put32(opt.linktype);
  }

  void packet(std::uint64_t t_us, Endpoint src, Endpoint dst, std::uint32_t seq, std::uint32_t ack,
              std::uint8_t flags, std::span<const std::uint8_t> payload) {
    std::vector<std::uint8_t> f;
    if (opt_.linktype == kLinkEthernet) {
      const std::array<std::uint8_t, 12> macs{0x02, 0, 0, 0, 0, 1, 0x02, 0, 0, 0, 0, 2};
      f.insert(f.end(), macs.begin(), macs.end());
      f.push_back(0x08);
      f.push_back(0x00);
    }
    const std::size_t ip_start = f.size();
    const std::size_t total = 20 + 20 + payload.size();
    const std::array<std::uint8_t, 20> ip{0x45,
                                          0,
                                          static_cast<std::uint8_t>(total >> 8),
                                          static_cast<std::uint8_t>(total),
                                          static_cast<std::uint8_t>(ip_id_ >> 8),
                                          static_cast<std::uint8_t>(ip_id_),
                                          0x40,
                                          0,
                                          64,
                                          6,
                                          0,
                                          0,
                                          static_cast<std::uint8_t>(src.addr >> 24),
                                          static_cast<std::uint8_t>(src.addr >> 16),
                                          static_cast<std::uint8_t>(src.addr >> 8),
                                          static_cast<std::uint8_t>(src.addr),
                                          static_cast<std::uint8_t>(dst.addr >> 24),
                                          static_cast<std::uint8_t>(dst.addr >> 16),
                                          static_cast<std::uint8_t>(dst.addr >> 8),
                                          static_cast<std::uint8_t>(dst.addr)};
    ++ip_id_;
    f.insert(f.end(), ip.begin(), ip.end());
    std::uint32_t sum = 0;
    for (std::size_t i = 0; i < 20; i += 2) sum += be16(f.data() + ip_start + i);
    while (sum >> 16) sum = (sum & 0xFFFF) + (sum >> 16);
    f[ip_start + 10] = static_cast<std::uint8_t>(~sum >> 8);
    f[ip_start + 11] = static_cast<std::uint8_t>(~sum);

    auto push16 = [&](std::uint16_t v) {
      f.push_back(static_cast<std::uint8_t>(v >> 8));
      f.push_back(static_cast<std::uint8_t>(v));
    };
    auto push32 = [&](std::uint32_t v) {
      push16(static_cast<std::uint16_t>(v >> 16));
      push16(static_cast<std::uint16_t>(v));
    };
    push16(src.port);
    push16(dst.port);
    push32(seq);
    push32(ack);
    f.push_back(0x50);
    f.push_back(flags);
    push16(65535);
    push16(0);  // checksum left zero
    push16(0);
    f.insert(f.end(), payload.begin(), payload.end());

    const std::uint64_t abs_us = opt_.epoch_us + t_us;
    put32(static_cast<std::uint32_t>(abs_us / 1000000ULL));
    const std::uint64_t frac = abs_us % 1000000ULL;
    put32(static_cast<std::uint32_t>(opt_.nanosecond ? frac * 1000 : frac));
    put32(static_cast<std::uint32_t>(f.size()));
    put32(static_cast<std::uint32_t>(f.size()));
    out_.insert(out_.end(), f.begin(), f.end());
  }

  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  void put16(std::uint16_t v) {
    if (opt_.big_endian) {
      out_.push_back(static_cast<std::uint8_t>(v >> 8));
      out_.push_back(static_cast<std::uint8_t>(v));
    } else {
      out_.push_back(static_cast<std::uint8_t>(v));
      out_.push_back(static_cast<std::uint8_t>(v >> 8));
    }
  }
  void put32(std::uint32_t v) {
    if (opt_.big_endian) {
      put16(static_cast<std::uint16_t>(v >> 16));
      put16(static_cast<std::uint16_t>(v));
    } else {
      put16(static_cast<std::uint16_t>(v));
      put16(static_cast<std::uint16_t>(v >> 16));
    }
  }

  const PcapWriteOptions& opt_;
  std::vector<std::uint8_t> out_;
  std::uint16_t ip_id_ = 1;
};

}  // namespace

std::vector<std::uint8_t> write_pcap(const Trace& trace, const PcapWriteOptions& options) {
  if (options.mss == 0) throw Error(Errc::ValidationError, "mss must be positive");
  PcapBuilder b(options);
  detail::Rng rng(options.seed);

  const std::uint32_t client_isn = static_cast<std::uint32_t>(rng.next());
  const std::uint32_t server_isn = static_cast<std::uint32_t>(rng.next());
  std::uint32_t client_seq = client_isn + 1;
  std::uint32_t server_seq = server_isn + 1;

  if (options.handshake) {
    const std::uint64_t t = trace.records.empty() ? 0 : trace.records.front().t_us;
    b.packet(t, options.client, options.server, client_isn, 0, kTcpSyn, {});
    b.packet(t, options.server, options.client, server_isn, client_seq, kTcpSyn | kTcpAck, {});
  }

  std::vector<std::uint8_t> bytes;
  for (const auto& r : trace.records) {
    bytes.assign(kRecordHeaderLen + r.len, 0);
    bytes[0] = r.ctype;
    bytes[1] = 0x03;
    bytes[2] = 0x03;
    bytes[3] = static_cast<std::uint8_t>(r.len >> 8);
    bytes[4] = static_cast<std::uint8_t>(r.len);
    for (std::size_t i = kRecordHeaderLen; i < bytes.size(); ++i) bytes[i] = static_cast<std::uint8_t>(rng.next());

    const bool c2s = r.dir == Direction::ClientToServer;
    std::uint32_t& seq = c2s ? client_seq : server_seq;
    const std::uint32_t ack = c2s ? server_seq : client_seq;
    const Endpoint src = c2s ? options.client : options.server;
    const Endpoint dst = c2s ? options.server : options.client;
    for (std::size_t off = 0; off < bytes.size(); off += options.mss) {
      const std::size_t n = std::min(options.mss, bytes.size() - off);
      b.packet(r.t_us, src, dst, seq, ack, kTcpAck | kTcpPsh, std::span(bytes).subspan(off, n));
      seq += static_cast<std::uint32_t>(n);
    }
  }
  return b.take();
}

}  // namespace choiceleak
