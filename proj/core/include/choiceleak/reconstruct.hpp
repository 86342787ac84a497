#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "choiceleak/classifier.hpp"
#include "choiceleak/script_graph.hpp"
#include "choiceleak/simulator.hpp"

namespace choiceleak {

enum class BasisRule : std::uint8_t { Type2Observed, NoType2Default };

enum class AnomalyKind : std::uint8_t {
  OrphanType2,     ///< Type2 with no preceding Type1
  DuplicateType2,  ///< extra Type2 after the one that decided Alt
  SurplusType1,    ///< Type1 after the walk reached a segment without a question
  UnconsumedType2, ///< Type2 following a surplus Type1
};

std::string_view to_string(BasisRule r) noexcept;
std::string_view to_string(AnomalyKind k) noexcept;

struct DecisionBasis {
  std::string qid;
  BasisRule rule = BasisRule::NoType2Default;

  bool operator==(const DecisionBasis&) const = default;
};

struct Anomaly {
  AnomalyKind kind = AnomalyKind::OrphanType2;
  std::uint64_t t_us = 0;

  bool operator==(const Anomaly&) const = default;
};

struct Reconstruction {
  ChoicePath path;
  std::vector<DecisionBasis> basis;  ///< one per decision
  std::vector<Anomaly> anomalies;
};

/// Walks the graph from its entry. The i-th Type1 marks arrival at the i-th
/// question; a Type2 before the next Type1 (or the end of the stream) makes
/// that decision Alt, otherwise Default. Stops when events run out or the
/// current segment has no question. Deviations become anomalies.
Reconstruction reconstruct_path(const std::vector<ClassifiedEvent>& events, const ScriptGraph& graph);

/// 1 - anomalies / max(1, |events|).
double consistency_score(const Reconstruction& reconstruction, const std::vector<ClassifiedEvent>& events,
                         const ScriptGraph& graph);

/// Brute-force alternative to reconstruct_path.
///
/// Every enumerable path (at most 12 questions deep) is simulated with a
/// jitter-free, noise-free copy of the model; its signature is the
/// time-ordered sequence of control-record lengths. A trace is matched to the
/// path minimising the symmetric difference between (position, length) pairs
/// of its band-filtered client lengths and the signature; ties go to the
/// lexicographically smaller path.
class PathSignatureOracle {
 public:
  static constexpr std::size_t kMaxQuestions = 12;

  PathSignatureOracle(const ScriptGraph& graph, const SideChannelModel& model);

  ChoicePath match(const Trace& trace) const;
  std::size_t path_count() const { return paths_.size(); }

 private:
  std::vector<std::int32_t> filtered_lengths(const Trace& trace) const;

  LengthInterval type1_;
  LengthInterval type2_;
  std::vector<ChoicePath> paths_;
  std::vector<std::vector<std::int32_t>> signatures_;
};

ChoicePath oracle_reconstruct(const Trace& trace, const ScriptGraph& graph, const SideChannelModel& model);

std::string reconstruction_to_json(const Reconstruction& r, double score);

}  // namespace choiceleak
