#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "choiceleak/profile.hpp"
#include "choiceleak/tls.hpp"

namespace choiceleak {

enum class Origin { Captured, Synthetic };

struct TraceMeta {
  std::string trace_id;
  /// Unknown for captures that were not tagged with their conditions.
  std::optional<OperationalProfile> profile;
  Origin origin = Origin::Synthetic;
  /// Ingest only: TLS-bearing connections merged into the timeline and
  /// direction streams abandoned at a sequence gap.
  std::optional<std::uint32_t> connections;
  std::optional<std::uint32_t> reassembly_gaps;

  bool operator==(const TraceMeta&) const = default;
};

/// Records ordered by t_us (stable for ties).
struct Trace {
  TraceMeta meta;
  std::vector<TlsRecord> records;

  bool operator==(const Trace&) const = default;
};

/// Trace JSONL: a header object on the first line, then one record per line
/// as {"t_us","dir":"c2s"|"s2c","ctype","len"}. Throws ParseError or
/// OrderViolation (decreasing t_us).
Trace read_trace(std::string_view jsonl);
std::string write_trace(const Trace& trace);
void write_trace(std::ostream& out, const Trace& trace);

Trace load_trace_file(const std::string& path);
void save_trace_file(const std::string& path, const Trace& trace);

inline bool is_client_app_data(const TlsRecord& r) {
  return r.dir == Direction::ClientToServer && r.ctype == content_type::kApplicationData;
}

struct LengthSample {
  std::uint64_t t_us = 0;
  std::uint32_t len = 0;

  bool operator==(const LengthSample&) const = default;
};

/// Client-to-server application-data record lengths in time order.
std::vector<LengthSample> client_record_lengths(const Trace& trace);

}  // namespace choiceleak
