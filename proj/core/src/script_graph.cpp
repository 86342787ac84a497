#include "choiceleak/script_graph.hpp"

#include <algorithm>
#include <deque>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "choiceleak/error.hpp"
#include "json_util.hpp"

namespace choiceleak {

using detail::ojson;

const Segment* ScriptGraph::find_segment(std::string_view id) const {
  auto it = std::find_if(segments.begin(), segments.end(), [&](const Segment& s) { return s.id == id; });
  return it == segments.end() ? nullptr : &*it;
}

const ChoicePoint* ScriptGraph::choice_after(std::string_view segment_id) const {
  auto it = std::find_if(choices.begin(), choices.end(),
                         [&](const ChoicePoint& c) { return c.after_segment == segment_id; });
  return it == choices.end() ? nullptr : &*it;
}

const ChoicePoint* ScriptGraph::find_choice(std::string_view qid) const {
  auto it = std::find_if(choices.begin(), choices.end(), [&](const ChoicePoint& c) { return c.qid == qid; });
  return it == choices.end() ? nullptr : &*it;
}

std::size_t ScriptGraph::question_count() const {
  std::set<std::string_view> qids;
  for (const auto& c : choices) qids.insert(c.qid);
  return qids.size();
}

std::string_view to_string(Branch b) noexcept { return b == Branch::Default ? "Default" : "Alt"; }

std::string format_path(const ChoicePath& path) {
  std::string out;
  for (const auto& d : path.decisions) {
    if (!out.empty()) out += ',';
    out += d.qid;
    out += d.taken == Branch::Default ? "=D" : "=A";
  }
  return out;
}

ChoicePath parse_path(std::string_view text) {
  ChoicePath path;
  while (!text.empty()) {
    auto comma = text.find(',');
    std::string_view item = text.substr(0, comma);
    text = comma == std::string_view::npos ? std::string_view{} : text.substr(comma + 1);
    auto eq = item.find('=');
    if (eq == std::string_view::npos || eq == 0)
      throw Error(Errc::ParseError, "path item '" + std::string(item) + "' is not QID=D|A");
    std::string_view v = item.substr(eq + 1);
    Branch b;
    if (v == "D" || v == "Default")
      b = Branch::Default;
    else if (v == "A" || v == "Alt")
      b = Branch::Alt;
    else
      throw Error(Errc::ParseError, "path item '" + std::string(item) + "' has unknown branch");
    path.decisions.push_back({std::string(item.substr(0, eq)), b});
  }
  return path;
}

ScriptGraph load_script(std::string_view json_text) {
  constexpr std::string_view what = "script";
  ojson doc = detail::parse_json(json_text, what);
  if (!doc.is_object()) throw Error(Errc::ParseError, "script: top level must be an object");

  ScriptGraph g;
  g.entry = detail::require_string(doc, "entry", what);

  const ojson& segs = detail::require(doc, "segments", what);
  if (!segs.is_array()) throw Error(Errc::ParseError, "script: 'segments' must be an array");
  for (const auto& s : segs) {
    g.segments.push_back({detail::require_string(s, "id", "segment"), detail::require_int(s, "duration_ms", "segment"),
                          detail::require_int(s, "chunk_ms", "segment")});
  }

  if (auto it = doc.find("choices"); it != doc.end()) {
    if (!it->is_array()) throw Error(Errc::ParseError, "script: 'choices' must be an array");
    for (const auto& c : *it) {
      ChoicePoint cp{detail::require_string(c, "qid", "choice"), detail::require_string(c, "after_segment", "choice"),
                     detail::require_string(c, "default_next", "choice"),
                     detail::require_string(c, "alt_next", "choice")};
      if (auto w = c.find("window_ms"); w != c.end()) cp.window_ms = detail::as_int(*w, "window_ms", "choice");
      g.choices.push_back(std::move(cp));
    }
  }

  if (auto violations = validate_graph(g); !violations.empty()) {
    std::string msg;
    for (const auto& v : violations) msg += (msg.empty() ? "" : "; ") + v;
    throw Error(Errc::ValidationError, msg);
  }
  return g;
}

ScriptGraph load_script_file(const std::string& path) { return load_script(detail::read_file(path)); }

std::string write_script(const ScriptGraph& graph) {
  ojson doc;
  doc["entry"] = graph.entry;
  doc["segments"] = ojson::array();
  for (const auto& s : graph.segments)
    doc["segments"].push_back({{"id", s.id}, {"duration_ms", s.duration_ms}, {"chunk_ms", s.chunk_ms}});
  doc["choices"] = ojson::array();
  for (const auto& c : graph.choices) {
    doc["choices"].push_back({{"qid", c.qid},
                              {"after_segment", c.after_segment},
                              {"default_next", c.default_next},
                              {"alt_next", c.alt_next},
                              {"window_ms", c.window_ms}});
  }
  return doc.dump(2) + "\n";
}

std::vector<std::string> validate_graph(const ScriptGraph& graph) {
  std::vector<std::string> out;

  std::unordered_set<std::string> ids;
  for (const auto& s : graph.segments) {
    if (s.id.empty()) out.push_back("segment with empty id");
    if (!ids.insert(s.id).second) out.push_back("duplicate segment id '" + s.id + "'");
    if (s.chunk_ms < 1) out.push_back("segment '" + s.id + "': chunk_ms must be >= 1");
    if (s.duration_ms < s.chunk_ms) out.push_back("segment '" + s.id + "': duration_ms must be >= chunk_ms");
  }

  if (!ids.contains(graph.entry)) out.push_back("entry '" + graph.entry + "' is not a segment");

  std::unordered_map<std::string, const ChoicePoint*> by_after;
  std::unordered_map<std::string, const ChoicePoint*> by_qid;
  for (const auto& c : graph.choices) {
    const std::string q = "question '" + c.qid + "'";
    if (c.qid.empty()) out.push_back("question with empty qid after '" + c.after_segment + "'");
    for (const auto* ref : {&c.after_segment, &c.default_next, &c.alt_next}) {
      if (!ids.contains(*ref)) out.push_back(q + ": unknown segment '" + *ref + "'");
    }
    if (c.default_next == c.alt_next) out.push_back(q + ": default_next equals alt_next");
    if (c.default_next == c.after_segment || c.alt_next == c.after_segment)
      out.push_back(q + ": self-loop on segment '" + c.after_segment + "'");
    if (c.window_ms < 1) out.push_back(q + ": window_ms must be positive");
    if (!by_after.emplace(c.after_segment, &c).second)
      out.push_back("segment '" + c.after_segment + "' has more than one choice point");
    auto [it, fresh] = by_qid.emplace(c.qid, &c);
    if (!fresh) {
      const ChoicePoint& first = *it->second;
      if (first.default_next != c.default_next || first.alt_next != c.alt_next || first.window_ms != c.window_ms)
        out.push_back("duplicate " + q + " with conflicting options");
    }
  }

  if (ids.contains(graph.entry)) {
    std::unordered_set<std::string> seen{graph.entry};
    std::deque<std::string> queue{graph.entry};
    while (!queue.empty()) {
      std::string cur = std::move(queue.front());
      queue.pop_front();
      auto it = by_after.find(cur);
      if (it == by_after.end()) continue;
      for (const auto* next : {&it->second->default_next, &it->second->alt_next}) {
        if (ids.contains(*next) && seen.insert(*next).second) queue.push_back(*next);
      }
    }
    for (const auto& s : graph.segments) {
      if (!seen.contains(s.id)) out.push_back("segment '" + s.id + "' is unreachable from entry");
    }
  }
  return out;
}

namespace {

struct PathWalker {
  const ScriptGraph& graph;
  std::size_t max_questions;
  std::vector<ChoicePath>& out;
  ChoicePath current;
  std::unordered_map<std::string, int> visits;
  bool revisited = false;

  void walk(const std::string& segment) {
    const ChoicePoint* cp = graph.choice_after(segment);
    if (cp == nullptr) {
      out.push_back(current);
      return;
    }
    if (current.size() == max_questions) {
      if (revisited || visits[cp->qid] > 0)
        throw Error(Errc::DepthExceeded, "question '" + cp->qid + "' revisited beyond " +
                                             std::to_string(max_questions) + " decisions");
      out.push_back(current);
      return;
    }
    const bool was_revisited = revisited;
    if (++visits[cp->qid] > 1) revisited = true;
    for (Branch b : {Branch::Default, Branch::Alt}) {
      current.decisions.push_back({cp->qid, b});
      walk(b == Branch::Default ? cp->default_next : cp->alt_next);
      current.decisions.pop_back();
    }
    --visits[cp->qid];
    revisited = was_revisited;
  }
};

}  // namespace

std::vector<ChoicePath> enumerate_paths(const ScriptGraph& graph, std::size_t max_questions) {
  if (max_questions == 0) throw Error(Errc::ValidationError, "max_questions must be positive");
  std::vector<ChoicePath> out;
  PathWalker walker{graph, max_questions, out, {}, {}};
  walker.walk(graph.entry);
  return out;
}

std::vector<std::string> segments_for_path(const ScriptGraph& graph, const ChoicePath& path) {
  std::vector<std::string> seq{graph.entry};
  for (std::size_t i = 0; i < path.decisions.size(); ++i) {
    const Decision& d = path.decisions[i];
    const ChoicePoint* cp = graph.choice_after(seq.back());
    if (cp == nullptr || cp->qid != d.qid) {
      throw Error(Errc::InconsistentPath, "decision " + std::to_string(i) + " for '" + d.qid +
                                              "' does not match the question after segment '" + seq.back() + "'");
    }
    seq.push_back(d.taken == Branch::Default ? cp->default_next : cp->alt_next);
  }
  return seq;
}

ScriptGraph make_chain_script(std::size_t questions, std::int64_t segment_ms, std::int64_t chunk_ms,
                              std::int64_t window_ms) {
  ScriptGraph g;
  g.entry = "s0";
  g.segments.push_back({"s0", segment_ms, chunk_ms});
  for (std::size_t i = 1; i <= questions; ++i) {
    const std::string id = "S" + std::to_string(i);
    g.segments.push_back({id, segment_ms, chunk_ms});
    g.segments.push_back({id + "'", segment_ms, chunk_ms});
  }
  for (std::size_t i = 1; i <= questions; ++i) {
    const std::string qid = "Q" + std::to_string(i);
    const std::string next = "S" + std::to_string(i);
    if (i == 1) {
      g.choices.push_back({qid, "s0", next, next + "'", window_ms});
    } else {
      const std::string prev = "S" + std::to_string(i - 1);
      g.choices.push_back({qid, prev, next, next + "'", window_ms});
      g.choices.push_back({qid, prev + "'", next, next + "'", window_ms});
    }
  }
  return g;
}

}  // namespace choiceleak
