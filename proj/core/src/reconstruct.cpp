#include "choiceleak/reconstruct.hpp"

#include <algorithm>

#include "choiceleak/error.hpp"
#include "json_util.hpp"

namespace choiceleak {

using detail::ojson;

std::string_view to_string(BasisRule r) noexcept {
  return r == BasisRule::Type2Observed ? "Type2Observed" : "NoType2Default";
}

std::string_view to_string(AnomalyKind k) noexcept {
  switch (k) {
    case AnomalyKind::OrphanType2: return "OrphanType2";
    case AnomalyKind::DuplicateType2: return "DuplicateType2";
    case AnomalyKind::SurplusType1: return "SurplusType1";
    case AnomalyKind::UnconsumedType2: return "UnconsumedType2";
  }
  return "?";
}

Reconstruction reconstruct_path(const std::vector<ClassifiedEvent>& events, const ScriptGraph& graph) {
  Reconstruction out;
  std::string segment = graph.entry;
  const ChoicePoint* open = nullptr;  // question awaiting a possible Type2
  bool open_alt = false;
  bool walk_done = false;

  auto close_open = [&] {
    if (open == nullptr) return;
    out.path.decisions.push_back({open->qid, open_alt ? Branch::Alt : Branch::Default});
    out.basis.push_back({open->qid, open_alt ? BasisRule::Type2Observed : BasisRule::NoType2Default});
    segment = open_alt ? open->alt_next : open->default_next;
    open = nullptr;
    open_alt = false;
  };

  for (const auto& e : events) {
    if (e.kind == ControlKind::Type1) {
      close_open();
      const ChoicePoint* cp = walk_done ? nullptr : graph.choice_after(segment);
      if (cp == nullptr) {
        walk_done = true;
        out.anomalies.push_back({AnomalyKind::SurplusType1, e.t_us});
        continue;
      }
      open = cp;
      continue;
    }
    if (open != nullptr) {
      if (open_alt)
        out.anomalies.push_back({AnomalyKind::DuplicateType2, e.t_us});
      else
        open_alt = true;
    } else {
      out.anomalies.push_back({walk_done ? AnomalyKind::UnconsumedType2 : AnomalyKind::OrphanType2, e.t_us});
    }
  }
  close_open();
  return out;
}

double consistency_score(const Reconstruction& reconstruction, const std::vector<ClassifiedEvent>& events,
                         const ScriptGraph& /*graph*/) {
  const double denom = static_cast<double>(std::max<std::size_t>(1, events.size()));
  return 1.0 - static_cast<double>(reconstruction.anomalies.size()) / denom;
}

PathSignatureOracle::PathSignatureOracle(const ScriptGraph& graph, const SideChannelModel& model)
    : type1_{model.type1.lo(), model.type1.hi()}, type2_{model.type2.lo(), model.type2.hi()} {
  paths_ = enumerate_paths(graph, kMaxQuestions);

  SideChannelModel clean = model;
  clean.type1.jitter = 0;
  clean.type2.jitter = 0;
  clean.chunk_req.jitter = 0;
  clean.noise_rate_hz = 0.0;

  signatures_.reserve(paths_.size());
  for (const auto& p : paths_) {
    const Session s = simulate_session(graph, p, OperationalProfile{}, clean, 0, "oracle");
    std::vector<std::int32_t> sig;
    for (const auto& e : s.truth.events) {
      if (e.kind == EventKind::Type1)
        sig.push_back(clean.type1.center);
      else if (e.kind == EventKind::Type2)
        sig.push_back(clean.type2.center);
    }
    signatures_.push_back(std::move(sig));
  }
}

std::vector<std::int32_t> PathSignatureOracle::filtered_lengths(const Trace& trace) const {
  std::vector<std::int32_t> out;
  for (const auto& r : trace.records) {
    if (is_client_app_data(r) && (type1_.contains(r.len) || type2_.contains(r.len))) out.push_back(r.len);
  }
  return out;
}

ChoicePath PathSignatureOracle::match(const Trace& trace) const {
  const auto observed = filtered_lengths(trace);
  std::size_t best = 0;
  std::size_t best_cost = SIZE_MAX;
  for (std::size_t i = 0; i < paths_.size(); ++i) {
    const auto& sig = signatures_[i];
    const std::size_t common = std::min(sig.size(), observed.size());
    std::size_t same = 0;
    for (std::size_t k = 0; k < common; ++k) same += sig[k] == observed[k] ? 1 : 0;
    const std::size_t cost = sig.size() + observed.size() - 2 * same;
    if (cost < best_cost) {
      best_cost = cost;
      best = i;
    }
  }
  return paths_.empty() ? ChoicePath{} : paths_[best];
}

ChoicePath oracle_reconstruct(const Trace& trace, const ScriptGraph& graph, const SideChannelModel& model) {
  return PathSignatureOracle(graph, model).match(trace);
}

std::string reconstruction_to_json(const Reconstruction& r, double score) {
  ojson j;
  j["path"] = ojson::array();
  for (const auto& d : r.path.decisions) j["path"].push_back({{"qid", d.qid}, {"taken", to_string(d.taken)}});
  j["basis"] = ojson::array();
  for (const auto& b : r.basis) j["basis"].push_back({{"qid", b.qid}, {"rule", to_string(b.rule)}});
  j["anomalies"] = ojson::array();
  for (const auto& a : r.anomalies) j["anomalies"].push_back({{"kind", to_string(a.kind)}, {"t_us", a.t_us}});
  j["score"] = score;
  return j.dump(2) + "\n";
}

}  // namespace choiceleak
