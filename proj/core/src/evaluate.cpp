#include "choiceleak/evaluate.hpp"

#include <algorithm>
#include <cmath>

#include "choiceleak/error.hpp"
#include "choiceleak/reconstruct.hpp"
#include "parallel.hpp"

namespace choiceleak {

namespace {

double ratio(std::uint64_t num, std::uint64_t den) {
  return den == 0 ? 1.0 : static_cast<double>(num) / static_cast<double>(den);
}

std::size_t kind_index(ControlKind k) { return k == ControlKind::Type1 ? 0 : 1; }

struct Split {
  std::size_t calibration;
  std::size_t evaluation;
};

Split split_sizes(std::size_t n, double fraction) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw Error(Errc::ValidationError, "calibration fraction must be in (0,1)");
  if (n < 2) throw Error(Errc::EmptySplit, "need at least two sessions, have " + std::to_string(n));
  const std::size_t cal = calibration_count(n, fraction);
  if (cal == 0 || cal >= n)
    throw Error(Errc::EmptySplit, "calibration split of " + std::to_string(cal) + " leaves no evaluation sessions");
  return {cal, n - cal};
}

}  // namespace

std::size_t calibration_count(std::size_t n, double fraction) {
  // Guard against 0.1 * 100 landing a hair above 10.
  const double raw = fraction * static_cast<double>(n);
  return static_cast<std::size_t>(std::ceil(raw - 1e-9));
}

SessionScore score_session(const Session& session, const LengthBands& bands, const ScriptGraph& graph) {
  SessionScore sc;
  const auto classified = classify_events(session.trace, bands);

  for (const auto& e : session.truth.events) {
    if (e.kind != EventKind::Type1 && e.kind != EventKind::Type2) continue;
    ++sc.control_events;
    auto it = std::lower_bound(classified.begin(), classified.end(), e.t_us,
                               [](const ClassifiedEvent& c, std::uint64_t t) { return c.t_us < t; });
    if (it == classified.end() || it->t_us != e.t_us) continue;
    ++sc.matched_events;
    const std::size_t truth_idx = e.kind == EventKind::Type1 ? 0 : 1;
    ++sc.confusion[truth_idx][kind_index(it->kind)];
    if (truth_idx == kind_index(it->kind)) ++sc.correct_events;
  }
  sc.spurious_events = classified.size() - sc.matched_events;

  const Reconstruction rec = reconstruct_path(classified, graph);
  const auto& truth = session.truth.path.decisions;
  const auto& got = rec.path.decisions;
  const std::size_t common = std::min(truth.size(), got.size());
  for (std::size_t i = 0; i < common; ++i) sc.correct_decisions += truth[i] == got[i] ? 1 : 0;
  sc.decisions = std::max(truth.size(), got.size());
  sc.exact_path = rec.path == session.truth.path;
  return sc;
}

Metrics aggregate(std::span<const SessionScore> scores) {
  Metrics m;
  for (const auto& s : scores) {
    ++m.sessions;
    for (std::size_t a = 0; a < 2; ++a)
      for (std::size_t b = 0; b < 2; ++b) m.confusion[a][b] += s.confusion[a][b];
    m.control_events += s.control_events;
    m.matched_events += s.matched_events;
    m.correct_events += s.correct_events;
    m.spurious_events += s.spurious_events;
    m.decisions += s.decisions;
    m.correct_decisions += s.correct_decisions;
    m.exact_paths += s.exact_path ? 1 : 0;
  }
  m.per_event_accuracy = ratio(m.correct_events, m.control_events);
  m.event_precision = ratio(m.correct_events, m.matched_events + m.spurious_events);
  m.per_choice_accuracy = ratio(m.correct_decisions, m.decisions);
  m.path_exact_rate = ratio(m.exact_paths, m.sessions);
  return m;
}

Metrics evaluate_sessions(std::span<const Session> sessions, const LengthBands& bands, const ScriptGraph& graph) {
  std::vector<SessionScore> scores(sessions.size());
  detail::parallel_for(sessions.size(), [&](std::size_t i) { scores[i] = score_session(sessions[i], bands, graph); });
  return aggregate(scores);
}

Metrics evaluate_pipeline(std::span<const Session> sessions, const ScriptGraph& graph, double calibration_fraction) {
  const Split split = split_sizes(sessions.size(), calibration_fraction);
  const LengthBands bands = calibrate_bands(sessions.first(split.calibration));
  return evaluate_sessions(sessions.subspan(split.calibration), bands, graph);
}

Metrics evaluate_pipeline(const DatasetManifest& manifest, double calibration_fraction) {
  split_sizes(manifest.entries.size(), calibration_fraction);
  const ScriptGraph graph = manifest.load_script();
  const auto sessions = manifest.load_all();
  return evaluate_pipeline(sessions, graph, calibration_fraction);
}

LengthInterval calibrate_chunk_band(std::span<const Session> labelled) {
  std::int32_t lo = INT32_MAX;
  std::int32_t hi = INT32_MIN;
  for (const auto& s : labelled) {
    const auto& recs = s.trace.records;
    for (const auto& e : s.truth.events) {
      if (e.kind != EventKind::ChunkReq) continue;
      auto it = std::lower_bound(recs.begin(), recs.end(), e.t_us,
                                 [](const TlsRecord& r, std::uint64_t t) { return r.t_us < t; });
      for (; it != recs.end() && it->t_us == e.t_us; ++it) {
        if (!is_client_app_data(*it)) continue;
        lo = std::min<std::int32_t>(lo, it->len);
        hi = std::max<std::int32_t>(hi, it->len);
      }
    }
  }
  if (lo > hi) throw Error(Errc::InsufficientLabels, "no labelled chunk requests in the calibration split");
  return {lo - 1, hi + 1};
}

DefenseReport evaluate_defense(std::span<const Session> sessions, const ScriptGraph& graph,
                               const DefensePolicy& policy, const LengthBands& bands, double calibration_fraction,
                               double gap_factor) {
  validate_policy(policy);
  if (!bands.valid()) throw Error(Errc::ValidationError, "attacker bands must be non-empty and disjoint");
  const Split split = split_sizes(sessions.size(), calibration_fraction);

  DefenseReport report;
  report.policy = policy;
  report.bands = bands;
  report.chunk_band = calibrate_chunk_band(sessions.first(split.calibration));

  std::vector<Session> defended(sessions.size());
  detail::parallel_for(sessions.size(), [&](std::size_t i) {
    defended[i].trace = apply_defense(sessions[i].trace, policy, bands);
    defended[i].truth = sessions[i].truth;
  });

  const std::span<const Session> eval_orig = sessions.subspan(split.calibration);
  const std::span<const Session> eval_def = std::span<const Session>(defended).subspan(split.calibration);
  report.before = evaluate_sessions(eval_orig, bands, graph);
  report.after = evaluate_sessions(eval_def, bands, graph);

  try {
    const LengthBands re = calibrate_bands(std::span<const Session>(defended).first(split.calibration));
    report.recalibrated_bands = re;
    report.after_recalibrated = evaluate_sessions(eval_def, re, graph);
  } catch (const Error& e) {
    if (e.code() != Errc::InseparableBands) throw;
    report.inseparable = true;
  }

  report.timing.resize(eval_def.size());
  detail::parallel_for(eval_def.size(), [&](std::size_t i) {
    const Session& s = eval_def[i];
    SessionTiming& t = report.timing[i];
    t.trace_id = s.trace.meta.trace_id;
    t.intervals = timing_probe(s.trace, report.chunk_band, gap_factor);
    t.windows = s.truth.windows.size();
    for (const auto& w : s.truth.windows) {
      const bool hit = std::any_of(t.intervals.begin(), t.intervals.end(),
                                   [&](const TimeInterval& iv) { return iv.overlaps(w.start_us, w.end_us); });
      t.windows_flagged += hit ? 1 : 0;
    }
  });

  std::uint64_t windows = 0;
  std::uint64_t flagged = 0;
  std::uint64_t full_sessions = 0;
  for (const auto& t : report.timing) {
    windows += t.windows;
    flagged += t.windows_flagged;
    full_sessions += t.windows_flagged == t.windows ? 1 : 0;
  }
  report.window_detection_rate = ratio(flagged, windows);
  report.session_detection_rate = ratio(full_sessions, report.timing.size());
  return report;
}

DefenseReport evaluate_defense(const DatasetManifest& manifest, const DefensePolicy& policy, const LengthBands& bands,
                               double calibration_fraction, double gap_factor) {
  split_sizes(manifest.entries.size(), calibration_fraction);
  const ScriptGraph graph = manifest.load_script();
  const auto sessions = manifest.load_all();
  return evaluate_defense(sessions, graph, policy, bands, calibration_fraction, gap_factor);
}

}  // namespace choiceleak
