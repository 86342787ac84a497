#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "choiceleak/simulator.hpp"
#include "choiceleak/trace.hpp"

namespace choiceleak {

/// Closed interval of record lengths.
struct LengthInterval {
  std::int32_t lo = 0;
  std::int32_t hi = -1;

  bool empty() const { return hi < lo; }
  bool contains(std::int64_t len) const { return len >= lo && len <= hi; }
  bool overlaps(const LengthInterval& o) const { return !empty() && !o.empty() && lo <= o.hi && o.lo <= hi; }

  bool operator==(const LengthInterval&) const = default;
};

struct LengthBands {
  LengthInterval type1;
  LengthInterval type2;

  bool valid() const { return !type1.empty() && !type2.empty() && !type1.overlaps(type2); }
  bool operator==(const LengthBands&) const = default;
};

enum class ControlKind : std::uint8_t { Type1, Type2 };

std::string_view to_string(ControlKind k) noexcept;

struct ClassifiedEvent {
  std::uint64_t t_us = 0;
  ControlKind kind = ControlKind::Type1;
  std::uint32_t len = 0;

  bool operator==(const ClassifiedEvent&) const = default;
};

/// Lengths of the client application-data records that carried each labelled
/// control event (matched by exact timestamp).
struct ControlSamples {
  std::vector<std::int32_t> type1;
  std::vector<std::int32_t> type2;
};

ControlSamples collect_control_samples(std::span<const Session> labelled);

/// Supervised band calibration.
///
/// Each band starts as [min - 1, max + 1] of its samples. If the two bands
/// overlap, both shrink to the nearest-rank [p1, p99] of their samples; if
/// they still overlap the side channel is considered closed.
/// Throws InsufficientLabels or InseparableBands.
LengthBands calibrate_bands(std::span<const Session> labelled);
LengthBands calibrate_bands(const ControlSamples& samples);

/// Client application-data records whose length falls in a band, in time
/// order. Records outside both bands are ignored.
std::vector<ClassifiedEvent> classify_events(const Trace& trace, const LengthBands& bands);

using Histogram = std::map<std::uint32_t, std::uint64_t>;

/// Client application-data lengths binned by floor(len / bin_width); keys are
/// bin lower bounds.
Histogram length_histogram(const Trace& trace, std::uint32_t bin_width);
void accumulate_histogram(Histogram& into, const Histogram& from);
std::string histogram_to_csv(const Histogram& hist);

std::string bands_to_json(const LengthBands& bands);
LengthBands bands_from_json(std::string_view text);

std::string events_to_json(const std::vector<ClassifiedEvent>& events, std::string_view trace_id = {});
std::vector<ClassifiedEvent> events_from_json(std::string_view text);

}  // namespace choiceleak
