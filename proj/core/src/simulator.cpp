#include "choiceleak/simulator.hpp"

#include <algorithm>
#include <cmath>

#include "choiceleak/error.hpp"
#include "json_util.hpp"
#include "rng.hpp"

namespace choiceleak {

using detail::ojson;

namespace {

constexpr std::uint64_t kPrefetchSpacingUs = 50'000;
constexpr std::uint64_t kServerLatencyUs = 20'000;
constexpr std::uint16_t kBulkRecordLen = 16384;

std::int32_t sample_length(const LengthDist& d, detail::Rng& rng) {
  if (d.jitter <= 0) return clamp_record_len(d.center);
  std::int64_t v;
  if (d.shape == LengthDist::Shape::Uniform) {
    v = d.center + rng.uniform_int(-d.jitter, d.jitter);
  } else {
    const double sigma = d.jitter / 4.0;
    v = std::llround(d.center + sigma * rng.normal());
    v = std::clamp<std::int64_t>(v, d.lo(), d.hi());
  }
  return clamp_record_len(v);
}

std::uint64_t chunk_count(const Segment& s) {
  return static_cast<std::uint64_t>((s.duration_ms + s.chunk_ms - 1) / s.chunk_ms);
}

struct ClientEvent {
  std::uint64_t t_us;
  EventKind kind;
  std::string qid;
  std::string segment;
  std::int32_t len;
};

bool separated(const SideChannelModel& m) {
  return std::abs(m.type1.center - m.type2.center) > m.type1.jitter + m.type2.jitter;
}

}  // namespace

std::int32_t clamp_record_len(std::int64_t len) {
  return static_cast<std::int32_t>(std::clamp<std::int64_t>(len, 1, kMaxRecordLen));
}

SideChannelModel SideChannelModel::noiseless() {
  SideChannelModel m;
  m.type1.jitter = 0;
  m.type2.jitter = 0;
  m.chunk_req.jitter = 0;
  m.noise_rate_hz = 0.0;
  return m;
}

std::string_view to_string(EventKind k) noexcept {
  switch (k) {
    case EventKind::Type1: return "Type1";
    case EventKind::Type2: return "Type2";
    case EventKind::ChunkReq: return "ChunkReq";
    case EventKind::Noise: return "Noise";
  }
  return "?";
}

std::optional<EventKind> parse_event_kind(std::string_view s) {
  for (EventKind k : {EventKind::Type1, EventKind::Type2, EventKind::ChunkReq, EventKind::Noise}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

std::size_t GroundTruthLog::count(EventKind k) const {
  return static_cast<std::size_t>(
      std::count_if(events.begin(), events.end(), [k](const TruthEvent& e) { return e.kind == k; }));
}

Session simulate_session(const ScriptGraph& graph, const ChoicePath& path, const OperationalProfile& profile,
                         const SideChannelModel& model, std::uint64_t seed, std::string trace_id) {
  const std::vector<std::string> played = segments_for_path(graph, path);
  detail::Rng rng(seed);

  std::vector<ClientEvent> client;
  std::uint64_t t = 0;
  std::uint64_t skip = 0;

  for (std::size_t i = 0; i < played.size(); ++i) {
    const Segment* seg = graph.find_segment(played[i]);
    if (seg == nullptr) throw Error(Errc::InconsistentPath, "segment '" + played[i] + "' missing from graph");
    const auto chunk_us = static_cast<std::uint64_t>(seg->chunk_ms) * 1000;
    const std::uint64_t chunks = chunk_count(*seg);
    for (std::uint64_t k = skip; k < chunks; ++k)
      client.push_back({t + k * chunk_us, EventKind::ChunkReq, {}, seg->id, sample_length(model.chunk_req, rng)});

    const std::uint64_t question_at = t + static_cast<std::uint64_t>(seg->duration_ms) * 1000;
    if (i + 1 == played.size()) {
      t = question_at;
      break;
    }

    const ChoicePoint* cp = graph.choice_after(seg->id);
    const Decision& decision = path.decisions[i];
    client.push_back({question_at, EventKind::Type1, cp->qid, {}, sample_length(model.type1, rng)});

    const auto window_us = static_cast<std::uint64_t>(cp->window_ms) * 1000;
    const std::uint64_t decide_after = static_cast<std::uint64_t>(rng.uniform_int(
        static_cast<std::int64_t>(window_us / 10), static_cast<std::int64_t>(window_us - window_us / 10)));
    const std::uint64_t decided_at = question_at + decide_after;

    const Segment* def = graph.find_segment(cp->default_next);
    const std::uint64_t prefetch = std::min<std::uint64_t>(model.prefetch_chunks, chunk_count(*def));
    for (std::uint64_t k = 1; k <= prefetch; ++k) {
      const std::uint64_t at = question_at + k * kPrefetchSpacingUs;
      if (decision.taken == Branch::Alt && at >= decided_at) break;
      client.push_back({at, EventKind::ChunkReq, {}, def->id, sample_length(model.chunk_req, rng)});
    }

    if (decision.taken == Branch::Alt) {
      client.push_back({decided_at, EventKind::Type2, cp->qid, {}, sample_length(model.type2, rng)});
      skip = 0;
    } else {
      skip = prefetch;
    }
    t = decided_at;
  }
  const std::uint64_t session_end = t;

  if (model.noise_rate_hz > 0.0) {
    double at = 0.0;
    for (;;) {
      at += rng.exponential(model.noise_rate_hz) * 1e6;
      if (at >= static_cast<double>(session_end)) break;
      client.push_back({static_cast<std::uint64_t>(at), EventKind::Noise, {}, {}, sample_length(model.noise_len, rng)});
    }
  }

  std::stable_sort(client.begin(), client.end(),
                   [](const ClientEvent& a, const ClientEvent& b) { return a.t_us < b.t_us; });
  for (std::size_t i = 1; i < client.size(); ++i) {
    if (client[i].t_us <= client[i - 1].t_us) client[i].t_us = client[i - 1].t_us + 1;
  }

  Session s;
  s.trace.meta.trace_id = std::move(trace_id);
  s.trace.meta.profile = profile;
  s.trace.meta.origin = Origin::Synthetic;
  s.truth.path = path;

  std::vector<TlsRecord> records;
  records.reserve(client.size() * 2);
  for (const auto& e : client) {
    records.push_back({e.t_us, Direction::ClientToServer, content_type::kApplicationData,
                       static_cast<std::uint16_t>(e.len)});
    s.truth.events.push_back({e.t_us, e.kind, e.qid, e.segment});
    if (e.kind == EventKind::Type1) {
      const auto window_us = static_cast<std::uint64_t>(graph.find_choice(e.qid)->window_ms) * 1000;
      s.truth.windows.push_back({e.qid, e.t_us, e.t_us + window_us});
    }
  }
  for (const auto& e : client) {
    if (e.kind == EventKind::ChunkReq)
      records.push_back(
          {e.t_us + kServerLatencyUs, Direction::ServerToClient, content_type::kApplicationData, kBulkRecordLen});
  }
  std::stable_sort(records.begin(), records.end(),
                   [](const TlsRecord& a, const TlsRecord& b) { return a.t_us < b.t_us; });
  s.trace.records = std::move(records);
  return s;
}

SideChannelModel model_for_profile(const OperationalProfile& profile, const SideChannelModel& base) {
  SideChannelModel m = base;

  std::int32_t chunk_shift = 0;
  switch (profile.os) {
    case Os::Windows: break;
    case Os::Linux: chunk_shift += 12; break;
    case Os::Mac: chunk_shift -= 8; break;
  }
  if (profile.browser == Browser::Firefox) chunk_shift += 20;
  m.chunk_req.center += chunk_shift;

  const std::int32_t control_shift = profile.browser == Browser::Firefox ? 2 : 0;
  m.type1.center += control_shift;
  m.type2.center += control_shift;
  if (separated(base) && !separated(m)) {
    m.type1.center = base.type1.center;
    m.type2.center = base.type2.center;
  }

  double rate_scale = 1.0;
  switch (profile.traffic_condition) {
    case TrafficCondition::Morning: rate_scale = 0.8; break;
    case TrafficCondition::Noon: rate_scale = 1.0; break;
    case TrafficCondition::Night: rate_scale = 1.3; break;
  }
  if (profile.connection == Connection::Wireless) rate_scale *= 1.15;
  m.noise_rate_hz *= rate_scale;
  return m;
}

std::string path_to_json(const ChoicePath& path) {
  ojson arr = ojson::array();
  for (const auto& d : path.decisions) arr.push_back({{"qid", d.qid}, {"taken", to_string(d.taken)}});
  return arr.dump();
}

std::string truth_to_json(const GroundTruthLog& log) {
  ojson j;
  j["path"] = ojson::array();
  for (const auto& d : log.path.decisions) j["path"].push_back({{"qid", d.qid}, {"taken", to_string(d.taken)}});
  j["events"] = ojson::array();
  for (const auto& e : log.events) {
    ojson ev;
    ev["t_us"] = e.t_us;
    ev["kind"] = to_string(e.kind);
    if (!e.qid.empty()) ev["qid"] = e.qid;
    if (!e.segment.empty()) ev["segment"] = e.segment;
    j["events"].push_back(std::move(ev));
  }
  j["windows"] = ojson::array();
  for (const auto& w : log.windows)
    j["windows"].push_back({{"qid", w.qid}, {"start_us", w.start_us}, {"end_us", w.end_us}});
  return j.dump() + "\n";
}

GroundTruthLog truth_from_json(std::string_view text) {
  constexpr std::string_view what = "ground truth";
  ojson j = detail::parse_json(text, what);
  GroundTruthLog log;

  const ojson& path = detail::require(j, "path", what);
  if (!path.is_array()) throw Error(Errc::ParseError, "ground truth: 'path' must be an array");
  for (const auto& d : path) {
    const std::string taken = detail::require_string(d, "taken", what);
    Branch b;
    if (taken == "Default")
      b = Branch::Default;
    else if (taken == "Alt")
      b = Branch::Alt;
    else
      throw Error(Errc::ParseError, "ground truth: unknown branch '" + taken + "'");
    log.path.decisions.push_back({detail::require_string(d, "qid", what), b});
  }

  const ojson& events = detail::require(j, "events", what);
  if (!events.is_array()) throw Error(Errc::ParseError, "ground truth: 'events' must be an array");
  for (const auto& e : events) {
    TruthEvent ev;
    const std::int64_t t = detail::require_int(e, "t_us", what);
    if (t < 0) throw Error(Errc::ParseError, "ground truth: negative t_us");
    ev.t_us = static_cast<std::uint64_t>(t);
    const std::string kind = detail::require_string(e, "kind", what);
    auto k = parse_event_kind(kind);
    if (!k) throw Error(Errc::ParseError, "ground truth: unknown event kind '" + kind + "'");
    ev.kind = *k;
    if (auto it = e.find("qid"); it != e.end()) ev.qid = detail::require_string(e, "qid", what);
    if (auto it = e.find("segment"); it != e.end()) ev.segment = detail::require_string(e, "segment", what);
    log.events.push_back(std::move(ev));
  }

  if (auto it = j.find("windows"); it != j.end()) {
    if (!it->is_array()) throw Error(Errc::ParseError, "ground truth: 'windows' must be an array");
    for (const auto& w : *it) {
      log.windows.push_back({detail::require_string(w, "qid", what),
                             static_cast<std::uint64_t>(detail::require_int(w, "start_us", what)),
                             static_cast<std::uint64_t>(detail::require_int(w, "end_us", what))});
    }
  }
  return log;
}

}  // namespace choiceleak
