#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "choiceleak/profile.hpp"
#include "choiceleak/script_graph.hpp"
#include "choiceleak/trace.hpp"

namespace choiceleak {

/// Integer length distribution with bounded support [center - jitter,
/// center + jitter]. Gaussian draws use sigma = jitter / 4, so the clamp sits
/// at 4 sigma; Uniform draws are flat over the support. Samples are also
/// clamped to [1, 16384].
struct LengthDist {
  enum class Shape : std::uint8_t { Gaussian, Uniform };

  std::int32_t center = 0;
  std::int32_t jitter = 0;
  Shape shape = Shape::Gaussian;

  std::int32_t lo() const { return center - jitter; }
  std::int32_t hi() const { return center + jitter; }

  bool operator==(const LengthDist&) const = default;
};

struct SideChannelModel {
  LengthDist type1{710, 8};
  LengthDist type2{910, 8};
  LengthDist chunk_req{450, 40};
  double noise_rate_hz = 0.5;
  LengthDist noise_len{770, 690, LengthDist::Shape::Uniform};  // [80, 1460]
  std::uint32_t prefetch_chunks = 3;

  /// Defaults with zero jitter on every length and no background noise.
  static SideChannelModel noiseless();

  bool operator==(const SideChannelModel&) const = default;
};

enum class EventKind : std::uint8_t { Type1, Type2, ChunkReq, Noise };

std::string_view to_string(EventKind k) noexcept;
std::optional<EventKind> parse_event_kind(std::string_view s);

struct TruthEvent {
  std::uint64_t t_us = 0;
  EventKind kind = EventKind::Noise;
  std::string qid;      ///< Type1 / Type2 only
  std::string segment;  ///< ChunkReq only: segment the chunk belongs to

  bool operator==(const TruthEvent&) const = default;
};

/// Interval during which a question was on screen.
struct ChoiceWindow {
  std::string qid;
  std::uint64_t start_us = 0;
  std::uint64_t end_us = 0;

  bool operator==(const ChoiceWindow&) const = default;
};

struct GroundTruthLog {
  std::vector<TruthEvent> events;  ///< every client application-data record, in time order
  ChoicePath path;
  std::vector<ChoiceWindow> windows;

  std::size_t count(EventKind k) const;
  bool operator==(const GroundTruthLog&) const = default;
};

struct Session {
  Trace trace;
  GroundTruthLog truth;
};

/// Runs the check-pointed streaming process for one viewer:
///
///   * each segment streams one client chunk request per chunk_ms (chunks
///     already prefetched are skipped), each answered by a 16384-byte server
///     record;
///   * when a question appears a Type1 record is sent, the default branch is
///     prefetched in a short burst, and the viewer decides at a uniform instant
///     in [0.1, 0.9] of the window;
///   * an Alt decision sends a Type2 record, cancels outstanding prefetches and
///     streams the alternate segment from its first chunk;
///   * background client records arrive as a Poisson process.
///
/// Client records get strictly increasing timestamps, so every truth event
/// identifies exactly one record. Deterministic in all inputs and `seed`.
/// Throws InconsistentPath when `path` does not fit `graph`.
Session simulate_session(const ScriptGraph& graph, const ChoicePath& path, const OperationalProfile& profile,
                         const SideChannelModel& model, std::uint64_t seed, std::string trace_id = "session");

/// Profile-specific variant of `base`. Shifts are deterministic and small:
/// browser and OS move the chunk-request size, the browser nudges both
/// control-record centers by the same amount, and traffic condition and
/// connection scale the noise rate. Jitters are never changed, and the
/// perturbation is dropped if it would bring the Type1 and Type2 supports
/// into contact.
SideChannelModel model_for_profile(const OperationalProfile& profile, const SideChannelModel& base);

std::int32_t clamp_record_len(std::int64_t len);

/// Ground-truth JSON: {"path":[{"qid","taken"}...],"events":[...],"windows":[...]}.
std::string truth_to_json(const GroundTruthLog& log);
GroundTruthLog truth_from_json(std::string_view text);

std::string path_to_json(const ChoicePath& path);

}  // namespace choiceleak
