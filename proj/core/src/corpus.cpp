#include "choiceleak/corpus.hpp"

#include <cstdio>

#include "choiceleak/error.hpp"
#include "json_codec.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace choiceleak {

using detail::ojson;

namespace {

std::string session_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "session-%04zu", i);
  return buf;
}

}  // namespace

ScriptGraph DatasetManifest::load_script() const {
  if (script_path.empty()) throw Error(Errc::ValidationError, "manifest has no script_path");
  return load_script_file(resolve(script_path).string());
}

Session DatasetManifest::load_session(std::size_t index) const {
  if (index >= entries.size()) throw Error(Errc::ValidationError, "manifest entry out of range");
  const ManifestEntry& e = entries[index];
  Session s;
  s.trace = load_trace_file(resolve(e.trace_path).string());
  s.truth = truth_from_json(detail::read_file(resolve(e.truth_path).string()));
  return s;
}

std::vector<Session> DatasetManifest::load_sessions(std::size_t first, std::size_t count) const {
  if (first > entries.size() || count > entries.size() - first)
    throw Error(Errc::ValidationError, "manifest range out of bounds");
  std::vector<Session> out(count);
  detail::parallel_for(count, [&](std::size_t i) { out[i] = load_session(first + i); });
  return out;
}

std::string manifest_to_json(const DatasetManifest& m) {
  ojson j;
  j["name"] = m.name;
  j["script_path"] = m.script_path;
  j["count"] = m.entries.size();
  j["entries"] = ojson::array();
  for (const auto& e : m.entries) {
    j["entries"].push_back(
        {{"trace_path", e.trace_path}, {"truth_path", e.truth_path}, {"profile", detail::profile_to_json(e.profile)}});
  }
  return j.dump(2) + "\n";
}

DatasetManifest manifest_from_json(std::string_view text, std::filesystem::path base_dir) {
  constexpr std::string_view what = "manifest";
  ojson j = detail::parse_json(text, what);
  DatasetManifest m;
  m.base_dir = std::move(base_dir);
  m.name = detail::require_string(j, "name", what);
  if (auto it = j.find("script_path"); it != j.end()) m.script_path = detail::require_string(j, "script_path", what);
  const ojson& entries = detail::require(j, "entries", what);
  if (!entries.is_array()) throw Error(Errc::ParseError, "manifest: 'entries' must be an array");
  for (const auto& e : entries) {
    m.entries.push_back({detail::require_string(e, "trace_path", what), detail::require_string(e, "truth_path", what),
                         detail::profile_from_json(detail::require(e, "profile", what))});
  }
  if (auto it = j.find("count"); it != j.end()) {
    if (detail::as_int(*it, "count", what) != static_cast<std::int64_t>(m.entries.size()))
      throw Error(Errc::ValidationError, "manifest: count does not match the number of entries");
  }
  return m;
}

DatasetManifest load_manifest(const std::filesystem::path& manifest_file) {
  return manifest_from_json(detail::read_file(manifest_file.string()), manifest_file.parent_path());
}

std::vector<Session> simulate_corpus(const ScriptGraph& graph, std::size_t n_sessions, std::uint64_t seed,
                                     const SideChannelModel& model, const CorpusOptions& options) {
  if (n_sessions == 0) throw Error(Errc::ValidationError, "n_sessions must be positive");
  if (auto v = validate_graph(graph); !v.empty()) throw Error(Errc::ValidationError, v.front());

  const auto paths = enumerate_paths(graph, options.max_questions);
  const auto profiles = default_profiles();

  struct Plan {
    std::size_t path;
    std::uint64_t seed;
  };
  std::vector<Plan> plan(n_sessions);
  detail::Rng rng(seed);
  for (auto& p : plan) {
    p.path = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(paths.size()) - 1));
    p.seed = rng.next();
  }

  std::vector<Session> out(n_sessions);
  detail::parallel_for(n_sessions, [&](std::size_t i) {
    const OperationalProfile& profile = profiles[i % profiles.size()];
    out[i] = simulate_session(graph, paths[plan[i].path], profile, model_for_profile(profile, model), plan[i].seed,
                              session_name(i));
  });
  return out;
}

DatasetManifest build_corpus(const ScriptGraph& graph, std::size_t n_sessions, std::uint64_t seed,
                             const SideChannelModel& model, const std::filesystem::path& out_dir,
                             const CorpusOptions& options) {
  const auto sessions = simulate_corpus(graph, n_sessions, seed, model, options);

  std::error_code ec;
  std::filesystem::create_directories(out_dir / "traces", ec);
  if (!ec) std::filesystem::create_directories(out_dir / "truth", ec);
  if (ec) throw Error(Errc::Io, "cannot create corpus directories under '" + out_dir.string() + "': " + ec.message());

  DatasetManifest m;
  m.name = options.name;
  m.script_path = "script.json";
  m.base_dir = out_dir;
  m.entries.resize(sessions.size());
  detail::write_file((out_dir / m.script_path).string(), write_script(graph));

  detail::parallel_for(sessions.size(), [&](std::size_t i) {
    const Session& s = sessions[i];
    ManifestEntry& e = m.entries[i];
    e.trace_path = "traces/" + s.trace.meta.trace_id + ".jsonl";
    e.truth_path = "truth/" + s.trace.meta.trace_id + ".json";
    e.profile = *s.trace.meta.profile;
    save_trace_file(m.resolve(e.trace_path).string(), s.trace);
    detail::write_file(m.resolve(e.truth_path).string(), truth_to_json(s.truth));
  });
  detail::write_file((out_dir / "manifest.json").string(), manifest_to_json(m));
  return m;
}

}  // namespace choiceleak
