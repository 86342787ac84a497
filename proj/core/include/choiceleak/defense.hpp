#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "choiceleak/classifier.hpp"
#include "choiceleak/trace.hpp"

namespace choiceleak {

struct DefensePolicy {
  enum class Kind : std::uint8_t { PadFixed, PadBuckets, Split, Compress };

  Kind kind = Kind::PadFixed;
  std::uint32_t pad_to = 1024;
  std::vector<std::uint32_t> buckets;
  std::uint32_t split_unit = 400;
  double ratio_lo = 0.5;
  double ratio_hi = 1.0;
  std::uint64_t seed = 0;

  static DefensePolicy pad_fixed(std::uint32_t pad_to);
  static DefensePolicy pad_buckets(std::vector<std::uint32_t> buckets);
  static DefensePolicy split(std::uint32_t unit);
  static DefensePolicy compress(double lo, double hi, std::uint64_t seed);

  bool operator==(const DefensePolicy&) const = default;
};

std::string_view to_string(DefensePolicy::Kind k) noexcept;

/// Throws BadPolicy for non-positive parameters, non-ascending buckets or a
/// ratio range outside (0, 1].
void validate_policy(const DefensePolicy& policy);

std::string policy_to_json(const DefensePolicy& policy);
DefensePolicy policy_from_json(std::string_view text);

/// Rewrites the client application-data records whose length lies in one of
/// the `protected_bands`; everything else passes through untouched.
///
///   PadFixed    len := pad_to (BadPolicy if a protected record is longer)
///   PadBuckets  len := smallest bucket >= len, or 16384 above the last bucket
///   Split       ceil(len / unit) records of `unit` bytes, the last one holding
///               the remainder, all at the original timestamp
///   Compress    len := ceil(len * r), r uniform in [ratio_lo, ratio_hi],
///               drawn per record from a stream keyed on (seed, trace_id)
Trace apply_defense(const Trace& trace, const DefensePolicy& policy,
                    std::span<const LengthInterval> protected_bands);
Trace apply_defense(const Trace& trace, const DefensePolicy& policy, const LengthBands& protected_bands);

struct TimeInterval {
  std::uint64_t start_us = 0;
  std::uint64_t end_us = 0;

  bool overlaps(std::uint64_t a, std::uint64_t b) const { return start_us <= b && a <= end_us; }
  bool operator==(const TimeInterval&) const = default;
};

inline constexpr double kDefaultGapFactor = 3.0;

/// Pauses in the chunk-request process. Among client application-data
/// records with length in `chunk_band`, every inter-arrival longer than
/// gap_factor times the median inter-arrival is reported as (previous, next).
std::vector<TimeInterval> timing_probe(const Trace& trace, const LengthInterval& chunk_band,
                                       double gap_factor = kDefaultGapFactor);

}  // namespace choiceleak
