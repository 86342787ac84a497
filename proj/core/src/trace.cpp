#include "choiceleak/trace.hpp"

#include <ostream>
#include <sstream>

#include "choiceleak/error.hpp"
#include "json_codec.hpp"

namespace choiceleak {

using detail::ojson;

namespace {

std::string_view origin_name(Origin o) { return o == Origin::Captured ? "captured" : "synthetic"; }

std::string header_line(const TraceMeta& meta) {
  ojson h;
  h["trace_id"] = meta.trace_id;
  h["origin"] = origin_name(meta.origin);
  h["profile"] = meta.profile ? detail::profile_to_json(*meta.profile) : ojson(nullptr);
  if (meta.connections) h["connections"] = *meta.connections;
  if (meta.reassembly_gaps) h["reassembly_gaps"] = *meta.reassembly_gaps;
  return h.dump();
}

TraceMeta parse_header(std::string_view line) {
  ojson h = detail::parse_json(line, "trace header");
  TraceMeta meta;
  meta.trace_id = detail::require_string(h, "trace_id", "trace header");
  if (meta.trace_id.empty()) throw Error(Errc::ParseError, "trace header: trace_id must be non-empty");
  const std::string origin = detail::require_string(h, "origin", "trace header");
  if (origin == "captured")
    meta.origin = Origin::Captured;
  else if (origin == "synthetic")
    meta.origin = Origin::Synthetic;
  else
    throw Error(Errc::ParseError, "trace header: unknown origin '" + origin + "'");
  if (auto it = h.find("profile"); it != h.end() && !it->is_null()) meta.profile = detail::profile_from_json(*it);
  auto opt_u32 = [&](const char* key) -> std::optional<std::uint32_t> {
    auto it = h.find(key);
    if (it == h.end()) return std::nullopt;
    std::int64_t v = detail::as_int(*it, key, "trace header");
    if (v < 0 || v > UINT32_MAX) throw Error(Errc::ParseError, std::string("trace header: ") + key + " out of range");
    return static_cast<std::uint32_t>(v);
  };
  meta.connections = opt_u32("connections");
  meta.reassembly_gaps = opt_u32("reassembly_gaps");
  return meta;
}

TlsRecord parse_record(std::string_view line, std::size_t line_no) {
  const std::string what = "trace line " + std::to_string(line_no);
  ojson j = detail::parse_json(line, what);
  TlsRecord r;
  const std::int64_t t = detail::require_int(j, "t_us", what);
  if (t < 0) throw Error(Errc::ParseError, what + ": t_us must be non-negative");
  r.t_us = static_cast<std::uint64_t>(t);
  const std::string dir = detail::require_string(j, "dir", what);
  if (dir == "c2s")
    r.dir = Direction::ClientToServer;
  else if (dir == "s2c")
    r.dir = Direction::ServerToClient;
  else
    throw Error(Errc::ParseError, what + ": dir must be c2s or s2c");
  const std::int64_t ctype = detail::require_int(j, "ctype", what);
  if (ctype < 0 || ctype > 255 || !is_valid_content_type(static_cast<std::uint8_t>(ctype)))
    throw Error(Errc::ParseError, what + ": ctype must be in 20..23");
  r.ctype = static_cast<std::uint8_t>(ctype);
  const std::int64_t len = detail::require_int(j, "len", what);
  if (len < 0 || len > kMaxRecordLen) throw Error(Errc::ParseError, what + ": len must be in 0..16384");
  r.len = static_cast<std::uint16_t>(len);
  return r;
}

}  // namespace

Trace read_trace(std::string_view jsonl) {
  Trace trace;
  bool have_header = false;
  std::size_t line_no = 0;
  while (!jsonl.empty()) {
    auto nl = jsonl.find('\n');
    std::string_view line = jsonl.substr(0, nl);
    jsonl = nl == std::string_view::npos ? std::string_view{} : jsonl.substr(nl + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
    if (!have_header) {
      trace.meta = parse_header(line);
      have_header = true;
      continue;
    }
    TlsRecord r = parse_record(line, line_no);
    if (!trace.records.empty() && r.t_us < trace.records.back().t_us) {
      throw Error(Errc::OrderViolation, "trace line " + std::to_string(line_no) + ": t_us " + std::to_string(r.t_us) +
                                            " precedes " + std::to_string(trace.records.back().t_us));
    }
    trace.records.push_back(r);
  }
  if (!have_header) throw Error(Errc::ParseError, "trace: missing header line");
  return trace;
}

void write_trace(std::ostream& out, const Trace& trace) {
  out << header_line(trace.meta) << '\n';
  for (const auto& r : trace.records) {
    out << R"({"t_us":)" << r.t_us << R"(,"dir":")" << (r.dir == Direction::ClientToServer ? "c2s" : "s2c")
        << R"(","ctype":)" << static_cast<int>(r.ctype) << R"(,"len":)" << r.len << "}\n";
  }
}

std::string write_trace(const Trace& trace) {
  std::ostringstream ss;
  write_trace(ss, trace);
  return ss.str();
}

Trace load_trace_file(const std::string& path) { return read_trace(detail::read_file(path)); }

void save_trace_file(const std::string& path, const Trace& trace) { detail::write_file(path, write_trace(trace)); }

std::vector<LengthSample> client_record_lengths(const Trace& trace) {
  std::vector<LengthSample> out;
  for (const auto& r : trace.records) {
    if (is_client_app_data(r)) out.push_back({r.t_us, r.len});
  }
  return out;
}

}  // namespace choiceleak
