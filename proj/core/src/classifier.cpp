#include "choiceleak/classifier.hpp"

#include <algorithm>
#include <cmath>

#include "choiceleak/error.hpp"
#include "json_util.hpp"

namespace choiceleak {

using detail::ojson;

namespace {

std::int32_t nearest_rank(const std::vector<std::int32_t>& sorted, double pct) {
  const auto n = static_cast<double>(sorted.size());
  auto rank = static_cast<std::size_t>(std::ceil(pct / 100.0 * n));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

LengthInterval parse_interval(const ojson& j, const char* key) {
  const ojson& v = detail::require(j, key, "bands");
  if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() || !v[1].is_number_integer())
    throw Error(Errc::ParseError, std::string("bands: '") + key + "' must be [lo, hi]");
  return {v[0].get<std::int32_t>(), v[1].get<std::int32_t>()};
}

}  // namespace

std::string_view to_string(ControlKind k) noexcept { return k == ControlKind::Type1 ? "Type1" : "Type2"; }

ControlSamples collect_control_samples(std::span<const Session> labelled) {
  ControlSamples out;
  for (const auto& s : labelled) {
    const auto& recs = s.trace.records;
    for (const auto& e : s.truth.events) {
      if (e.kind != EventKind::Type1 && e.kind != EventKind::Type2) continue;
      auto lo = std::lower_bound(recs.begin(), recs.end(), e.t_us,
                                 [](const TlsRecord& r, std::uint64_t t) { return r.t_us < t; });
      for (auto it = lo; it != recs.end() && it->t_us == e.t_us; ++it) {
        if (!is_client_app_data(*it)) continue;
        (e.kind == EventKind::Type1 ? out.type1 : out.type2).push_back(it->len);
      }
    }
  }
  return out;
}

LengthBands calibrate_bands(const ControlSamples& samples) {
  if (samples.type1.empty() || samples.type2.empty()) {
    throw Error(Errc::InsufficientLabels, "need at least one Type1 and one Type2 sample (have " +
                                              std::to_string(samples.type1.size()) + " and " +
                                              std::to_string(samples.type2.size()) + ")");
  }
  auto t1 = samples.type1;
  auto t2 = samples.type2;
  std::sort(t1.begin(), t1.end());
  std::sort(t2.begin(), t2.end());

  LengthBands bands{{t1.front() - 1, t1.back() + 1}, {t2.front() - 1, t2.back() + 1}};
  if (!bands.type1.overlaps(bands.type2)) return bands;

  bands = {{nearest_rank(t1, 1), nearest_rank(t1, 99)}, {nearest_rank(t2, 1), nearest_rank(t2, 99)}};
  if (bands.type1.overlaps(bands.type2)) {
    throw Error(Errc::InseparableBands, "Type1 [" + std::to_string(bands.type1.lo) + "," +
                                            std::to_string(bands.type1.hi) + "] overlaps Type2 [" +
                                            std::to_string(bands.type2.lo) + "," + std::to_string(bands.type2.hi) +
                                            "] after percentile shrink");
  }
  return bands;
}

LengthBands calibrate_bands(std::span<const Session> labelled) {
  return calibrate_bands(collect_control_samples(labelled));
}

std::vector<ClassifiedEvent> classify_events(const Trace& trace, const LengthBands& bands) {
  std::vector<ClassifiedEvent> out;
  for (const auto& r : trace.records) {
    if (!is_client_app_data(r)) continue;
    if (bands.type1.contains(r.len))
      out.push_back({r.t_us, ControlKind::Type1, r.len});
    else if (bands.type2.contains(r.len))
      out.push_back({r.t_us, ControlKind::Type2, r.len});
  }
  return out;
}

Histogram length_histogram(const Trace& trace, std::uint32_t bin_width) {
  if (bin_width == 0) throw Error(Errc::ValidationError, "bin_width must be >= 1");
  Histogram h;
  for (const auto& r : trace.records) {
    if (is_client_app_data(r)) ++h[r.len / bin_width * bin_width];
  }
  return h;
}

void accumulate_histogram(Histogram& into, const Histogram& from) {
  for (const auto& [bin, n] : from) into[bin] += n;
}

std::string histogram_to_csv(const Histogram& hist) {
  std::string out = "bin,count\n";
  for (const auto& [bin, n] : hist) out += std::to_string(bin) + "," + std::to_string(n) + "\n";
  return out;
}

std::string bands_to_json(const LengthBands& bands) {
  ojson j;
  j["type1"] = {bands.type1.lo, bands.type1.hi};
  j["type2"] = {bands.type2.lo, bands.type2.hi};
  return j.dump() + "\n";
}

LengthBands bands_from_json(std::string_view text) {
  ojson j = detail::parse_json(text, "bands");
  LengthBands b{parse_interval(j, "type1"), parse_interval(j, "type2")};
  if (!b.valid()) throw Error(Errc::ValidationError, "bands must be non-empty and disjoint");
  return b;
}

std::string events_to_json(const std::vector<ClassifiedEvent>& events, std::string_view trace_id) {
  ojson j;
  if (!trace_id.empty()) j["trace_id"] = trace_id;
  j["events"] = ojson::array();
  for (const auto& e : events) j["events"].push_back({{"t_us", e.t_us}, {"kind", to_string(e.kind)}, {"len", e.len}});
  return j.dump(1) + "\n";
}

std::vector<ClassifiedEvent> events_from_json(std::string_view text) {
  constexpr std::string_view what = "events";
  ojson j = detail::parse_json(text, what);
  const ojson& arr = detail::require(j, "events", what);
  if (!arr.is_array()) throw Error(Errc::ParseError, "events: 'events' must be an array");
  std::vector<ClassifiedEvent> out;
  for (const auto& e : arr) {
    ClassifiedEvent ev;
    const std::int64_t t = detail::require_int(e, "t_us", what);
    const std::int64_t len = detail::require_int(e, "len", what);
    if (t < 0 || len < 0) throw Error(Errc::ParseError, "events: negative t_us or len");
    ev.t_us = static_cast<std::uint64_t>(t);
    ev.len = static_cast<std::uint32_t>(len);
    const std::string kind = detail::require_string(e, "kind", what);
    if (kind == "Type1")
      ev.kind = ControlKind::Type1;
    else if (kind == "Type2")
      ev.kind = ControlKind::Type2;
    else
      throw Error(Errc::ParseError, "events: unknown kind '" + kind + "'");
    out.push_back(ev);
  }
  return out;
}

}  // namespace choiceleak
