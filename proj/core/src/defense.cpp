#include "choiceleak/defense.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "choiceleak/error.hpp"
#include "json_util.hpp"
#include "rng.hpp"

namespace choiceleak {

using detail::ojson;

DefensePolicy DefensePolicy::pad_fixed(std::uint32_t pad_to) {
  DefensePolicy p;
  p.kind = Kind::PadFixed;
  p.pad_to = pad_to;
  return p;
}

DefensePolicy DefensePolicy::pad_buckets(std::vector<std::uint32_t> buckets) {
  DefensePolicy p;
  p.kind = Kind::PadBuckets;
  p.buckets = std::move(buckets);
  return p;
}

DefensePolicy DefensePolicy::split(std::uint32_t unit) {
  DefensePolicy p;
  p.kind = Kind::Split;
  p.split_unit = unit;
  return p;
}

DefensePolicy DefensePolicy::compress(double lo, double hi, std::uint64_t seed) {
  DefensePolicy p;
  p.kind = Kind::Compress;
  p.ratio_lo = lo;
  p.ratio_hi = hi;
  p.seed = seed;
  return p;
}

std::string_view to_string(DefensePolicy::Kind k) noexcept {
  switch (k) {
    case DefensePolicy::Kind::PadFixed: return "PadFixed";
    case DefensePolicy::Kind::PadBuckets: return "PadBuckets";
    case DefensePolicy::Kind::Split: return "Split";
    case DefensePolicy::Kind::Compress: return "Compress";
  }
  return "?";
}

void validate_policy(const DefensePolicy& p) {
  switch (p.kind) {
    case DefensePolicy::Kind::PadFixed:
      if (p.pad_to == 0 || p.pad_to > kMaxRecordLen) throw Error(Errc::BadPolicy, "pad_to must be in 1..16384");
      break;
    case DefensePolicy::Kind::PadBuckets:
      if (p.buckets.empty()) throw Error(Errc::BadPolicy, "buckets must be non-empty");
      if (p.buckets.front() == 0) throw Error(Errc::BadPolicy, "buckets must be positive");
      if (std::adjacent_find(p.buckets.begin(), p.buckets.end(), std::greater_equal<>{}) != p.buckets.end())
        throw Error(Errc::BadPolicy, "buckets must be strictly ascending");
      if (p.buckets.back() > kMaxRecordLen) throw Error(Errc::BadPolicy, "buckets must not exceed 16384");
      break;
    case DefensePolicy::Kind::Split:
      if (p.split_unit == 0) throw Error(Errc::BadPolicy, "split_unit must be positive");
      break;
    case DefensePolicy::Kind::Compress:
      if (!(p.ratio_lo > 0.0) || p.ratio_hi > 1.0 || p.ratio_lo > p.ratio_hi)
        throw Error(Errc::BadPolicy, "compress ratio range must satisfy 0 < lo <= hi <= 1");
      break;
  }
}

std::string policy_to_json(const DefensePolicy& p) {
  ojson j;
  j["kind"] = to_string(p.kind);
  switch (p.kind) {
    case DefensePolicy::Kind::PadFixed: j["pad_to"] = p.pad_to; break;
    case DefensePolicy::Kind::PadBuckets: j["buckets"] = p.buckets; break;
    case DefensePolicy::Kind::Split: j["split_unit"] = p.split_unit; break;
    case DefensePolicy::Kind::Compress:
      j["compress_ratio_range"] = {p.ratio_lo, p.ratio_hi};
      j["seed"] = p.seed;
      break;
  }
  return j.dump() + "\n";
}

DefensePolicy policy_from_json(std::string_view text) {
  constexpr std::string_view what = "policy";
  ojson j = detail::parse_json(text, what);
  const std::string kind = detail::require_string(j, "kind", what);
  DefensePolicy p;
  auto positive_u32 = [&](const char* key) {
    const std::int64_t v = detail::require_int(j, key, what);
    if (v <= 0 || v > UINT32_MAX) throw Error(Errc::BadPolicy, std::string(key) + " must be positive");
    return static_cast<std::uint32_t>(v);
  };
  if (kind == "PadFixed") {
    p.kind = DefensePolicy::Kind::PadFixed;
    p.pad_to = positive_u32("pad_to");
  } else if (kind == "PadBuckets") {
    p.kind = DefensePolicy::Kind::PadBuckets;
    const ojson& b = detail::require(j, "buckets", what);
    if (!b.is_array()) throw Error(Errc::ParseError, "policy: 'buckets' must be an array");
    for (const auto& v : b) {
      const std::int64_t x = detail::as_int(v, "buckets", what);
      if (x <= 0 || x > UINT32_MAX) throw Error(Errc::BadPolicy, "buckets must be positive");
      p.buckets.push_back(static_cast<std::uint32_t>(x));
    }
  } else if (kind == "Split") {
    p.kind = DefensePolicy::Kind::Split;
    p.split_unit = positive_u32("split_unit");
  } else if (kind == "Compress") {
    p.kind = DefensePolicy::Kind::Compress;
    const ojson& r = detail::require(j, "compress_ratio_range", what);
    if (!r.is_array() || r.size() != 2 || !r[0].is_number() || !r[1].is_number())
      throw Error(Errc::ParseError, "policy: 'compress_ratio_range' must be [lo, hi]");
    p.ratio_lo = r[0].get<double>();
    p.ratio_hi = r[1].get<double>();
    if (auto s = j.find("seed"); s != j.end()) p.seed = static_cast<std::uint64_t>(detail::as_int(*s, "seed", what));
  } else {
    throw Error(Errc::ParseError, "policy: unknown kind '" + kind + "'");
  }
  validate_policy(p);
  return p;
}

Trace apply_defense(const Trace& trace, const DefensePolicy& policy,
                    std::span<const LengthInterval> protected_bands) {
  validate_policy(policy);
  for (std::size_t i = 0; i < protected_bands.size(); ++i)
    for (std::size_t k = i + 1; k < protected_bands.size(); ++k)
      if (protected_bands[i].overlaps(protected_bands[k]))
        throw Error(Errc::BadPolicy, "protected bands must be disjoint");

  auto is_protected = [&](const TlsRecord& r) {
    return is_client_app_data(r) && std::any_of(protected_bands.begin(), protected_bands.end(),
                                                [&](const LengthInterval& b) { return b.contains(r.len); });
  };

  detail::Rng rng(detail::derive_seed(policy.seed, detail::fnv1a(trace.meta.trace_id)));

  Trace out;
  out.meta = trace.meta;
  out.records.reserve(trace.records.size());
  for (const auto& r : trace.records) {
    if (!is_protected(r)) {
      out.records.push_back(r);
      continue;
    }
    TlsRecord t = r;
    switch (policy.kind) {
      case DefensePolicy::Kind::PadFixed:
        if (r.len > policy.pad_to)
          throw Error(Errc::BadPolicy, "protected record of " + std::to_string(r.len) + " bytes exceeds pad_to " +
                                           std::to_string(policy.pad_to));
        t.len = static_cast<std::uint16_t>(policy.pad_to);
        out.records.push_back(t);
        break;
      case DefensePolicy::Kind::PadBuckets: {
        auto it = std::lower_bound(policy.buckets.begin(), policy.buckets.end(), std::uint32_t{r.len});
        t.len = static_cast<std::uint16_t>(it == policy.buckets.end() ? kMaxRecordLen : *it);
        out.records.push_back(t);
        break;
      }
      case DefensePolicy::Kind::Split: {
        const std::uint32_t unit = policy.split_unit;
        const std::uint32_t parts = std::max<std::uint32_t>(1, (r.len + unit - 1) / unit);
        for (std::uint32_t k = 0; k < parts; ++k) {
          const std::uint32_t len = k + 1 < parts ? unit : r.len - (parts - 1) * unit;
          t.len = static_cast<std::uint16_t>(std::clamp<std::uint32_t>(len, 1, kMaxRecordLen));
          out.records.push_back(t);
        }
        break;
      }
      case DefensePolicy::Kind::Compress: {
        const double ratio = policy.ratio_lo + (policy.ratio_hi - policy.ratio_lo) * rng.uniform01();
        const auto len = static_cast<std::int64_t>(std::ceil(r.len * ratio));
        t.len = static_cast<std::uint16_t>(std::clamp<std::int64_t>(len, 1, kMaxRecordLen));
        out.records.push_back(t);
        break;
      }
    }
  }
  return out;
}

Trace apply_defense(const Trace& trace, const DefensePolicy& policy, const LengthBands& protected_bands) {
  const std::array bands{protected_bands.type1, protected_bands.type2};
  return apply_defense(trace, policy, bands);
}

std::vector<TimeInterval> timing_probe(const Trace& trace, const LengthInterval& chunk_band, double gap_factor) {
  if (!(gap_factor > 0.0)) throw Error(Errc::ValidationError, "gap_factor must be positive");
  std::vector<std::uint64_t> times;
  for (const auto& r : trace.records) {
    if (is_client_app_data(r) && chunk_band.contains(r.len)) times.push_back(r.t_us);
  }
  if (times.size() < 2) return {};

  std::vector<std::uint64_t> gaps(times.size() - 1);
  for (std::size_t i = 1; i < times.size(); ++i) gaps[i - 1] = times[i] - times[i - 1];
  std::vector<std::uint64_t> sorted = gaps;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const double median = n % 2 == 1 ? static_cast<double>(sorted[n / 2])
                                   : (static_cast<double>(sorted[n / 2 - 1]) + static_cast<double>(sorted[n / 2])) / 2.0;
  const double threshold = gap_factor * median;

  std::vector<TimeInterval> out;
  for (std::size_t i = 0; i < gaps.size(); ++i) {
    if (static_cast<double>(gaps[i]) > threshold) out.push_back({times[i], times[i + 1]});
  }
  return out;
}

}  // namespace choiceleak
