#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "choiceleak/trace.hpp"

namespace choiceleak {

/// IPv4 address and TCP port in host byte order.
struct Endpoint {
  std::uint32_t addr = 0;
  std::uint16_t port = 0;

  bool operator==(const Endpoint&) const = default;
};

std::optional<std::uint32_t> parse_ipv4(std::string_view text);
std::string format_ipv4(std::uint32_t addr);

/// Which side of each TCP connection is the viewer.
class ClientSelector {
 public:
  /// The source address of the first SYN (without ACK) in the capture.
  static ClientSelector first_syn_sender();
  /// A fixed endpoint; port 0 matches any port of `addr`.
  static ClientSelector endpoint(std::uint32_t addr, std::uint16_t port);
  /// "first-syn", "A.B.C.D" or "A.B.C.D:PORT". Throws ParseError.
  static ClientSelector parse(std::string_view text);

  bool uses_first_syn() const { return !fixed_; }
  const std::optional<Endpoint>& fixed() const { return fixed_; }

 private:
  std::optional<Endpoint> fixed_;
};

/// Reads a classic pcap capture (either byte order, microsecond or nanosecond
/// timestamps; Ethernet or raw IPv4 frames), reassembles every TCP direction
/// in sequence order and parses TLS records from the byte streams.
///
/// Records from all connections are merged into one timeline relative to the
/// first packet. A direction stream with a missing segment is abandoned at the
/// gap and counted in meta.reassembly_gaps. Connections that do not involve a
/// fixed client endpoint are skipped.
///
/// Throws BadMagic, TruncatedCapture, NoTcpPayload, ReassemblyConflict (a
/// retransmission disagreeing with bytes already seen) or ParseError
/// (unsupported link type).
Trace ingest_pcap(std::span<const std::uint8_t> capture, const ClientSelector& client,
                  std::string trace_id = "capture");
Trace ingest_pcap_file(const std::string& path, const ClientSelector& client);

struct PcapWriteOptions {
  Endpoint client{0x0A000002, 50123};  // 10.0.0.2
  Endpoint server{0x0A000001, 443};    // 10.0.0.1
  std::size_t mss = 1460;
  std::uint32_t linktype = 1;  ///< 1 Ethernet, 101 raw IPv4
  bool nanosecond = false;
  bool big_endian = false;
  bool handshake = true;  ///< emit SYN / SYN-ACK before any data
  std::uint64_t epoch_us = 1546000000ULL * 1000000ULL;
  std::uint64_t seed = 0;  ///< ciphertext filler bytes
};

/// Renders a trace as a single TLS-over-TCP connection. Each record is framed
/// with a 5-byte header and random body bytes and cut into MSS-sized segments
/// stamped with the record time.
std::vector<std::uint8_t> write_pcap(const Trace& trace, const PcapWriteOptions& options = {});

}  // namespace choiceleak
