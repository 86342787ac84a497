#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "choiceleak/classifier.hpp"
#include "choiceleak/corpus.hpp"
#include "choiceleak/defense.hpp"
#include "choiceleak/script_graph.hpp"
#include "choiceleak/simulator.hpp"

namespace choiceleak {

inline constexpr double kDefaultCalibrationFraction = 0.1;

/// Accuracy of the attack on an evaluation split.
///
/// A ground-truth control event is paired with the classified event carried
/// by the same record (identical timestamp; simulated client records never
/// share one). per_event_accuracy is the fraction of control events whose
/// pair has the right kind; classified events without a pair are counted as
/// spurious. Decisions are compared position by position against the true
/// path, over max(|true|, |reconstructed|) positions.
struct Metrics {
  double per_event_accuracy = 1.0;
  double per_choice_accuracy = 1.0;
  double path_exact_rate = 1.0;
  double event_precision = 1.0;
  /// confusion[truth][classified], index 0 = Type1, 1 = Type2.
  std::array<std::array<std::uint64_t, 2>, 2> confusion{};

  std::uint64_t sessions = 0;
  std::uint64_t control_events = 0;
  std::uint64_t matched_events = 0;
  std::uint64_t correct_events = 0;
  std::uint64_t spurious_events = 0;
  std::uint64_t decisions = 0;
  std::uint64_t correct_decisions = 0;
  std::uint64_t exact_paths = 0;

  bool operator==(const Metrics&) const = default;
};

/// Per-session tallies; summing them is order independent.
struct SessionScore {
  std::array<std::array<std::uint64_t, 2>, 2> confusion{};
  std::uint64_t control_events = 0;
  std::uint64_t matched_events = 0;
  std::uint64_t correct_events = 0;
  std::uint64_t spurious_events = 0;
  std::uint64_t decisions = 0;
  std::uint64_t correct_decisions = 0;
  bool exact_path = false;
};

SessionScore score_session(const Session& session, const LengthBands& bands, const ScriptGraph& graph);
Metrics aggregate(std::span<const SessionScore> scores);
Metrics evaluate_sessions(std::span<const Session> sessions, const LengthBands& bands, const ScriptGraph& graph);

/// Number of leading entries used for calibration: ceil(fraction * n).
std::size_t calibration_count(std::size_t n, double fraction);

/// Calibrates bands on the first ceil(fraction * N) manifest entries and
/// scores the rest. Throws EmptySplit, InseparableBands, InsufficientLabels.
Metrics evaluate_pipeline(const DatasetManifest& manifest, double calibration_fraction = kDefaultCalibrationFraction);
Metrics evaluate_pipeline(std::span<const Session> sessions, const ScriptGraph& graph,
                          double calibration_fraction = kDefaultCalibrationFraction);

struct SessionTiming {
  std::string trace_id;
  std::vector<TimeInterval> intervals;
  std::size_t windows = 0;
  std::size_t windows_flagged = 0;
};

struct DefenseReport {
  DefensePolicy policy;
  LengthBands bands;          ///< attacker bands used before and after
  LengthInterval chunk_band;  ///< chunk-request band given to timing_probe
  Metrics before;
  Metrics after;
  bool inseparable = false;  ///< recalibration on defended traces failed
  std::optional<LengthBands> recalibrated_bands;
  std::optional<Metrics> after_recalibrated;
  std::vector<SessionTiming> timing;
  double window_detection_rate = 0.0;   ///< flagged windows / all windows
  double session_detection_rate = 0.0;  ///< sessions with every window flagged
};

/// Scores the evaluation split with `bands` on the original and the defended
/// traces, then tries to recalibrate on the defended calibration split and
/// runs timing_probe on every defended evaluation trace. The chunk-request
/// band comes from the labelled chunk requests of the calibration split.
DefenseReport evaluate_defense(const DatasetManifest& manifest, const DefensePolicy& policy, const LengthBands& bands,
                               double calibration_fraction = kDefaultCalibrationFraction,
                               double gap_factor = kDefaultGapFactor);
DefenseReport evaluate_defense(std::span<const Session> sessions, const ScriptGraph& graph,
                               const DefensePolicy& policy, const LengthBands& bands,
                               double calibration_fraction = kDefaultCalibrationFraction,
                               double gap_factor = kDefaultGapFactor);

LengthInterval calibrate_chunk_band(std::span<const Session> labelled);

}  // namespace choiceleak
