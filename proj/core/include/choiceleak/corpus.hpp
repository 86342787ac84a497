#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "choiceleak/profile.hpp"
#include "choiceleak/script_graph.hpp"
#include "choiceleak/simulator.hpp"

namespace choiceleak {

struct ManifestEntry {
  std::string trace_path;  ///< relative to the manifest directory
  std::string truth_path;
  OperationalProfile profile;

  bool operator==(const ManifestEntry&) const = default;
};

/// Index of a labelled corpus: traces paired with ground truth and capture
/// conditions. Paths are stored relative to `base_dir`, the directory that
/// holds manifest.json.
struct DatasetManifest {
  std::string name;
  std::string script_path;
  std::vector<ManifestEntry> entries;
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const std::string& relative) const { return base_dir / relative; }
  ScriptGraph load_script() const;
  Session load_session(std::size_t index) const;
  std::vector<Session> load_sessions(std::size_t first, std::size_t count) const;
  std::vector<Session> load_all() const { return load_sessions(0, entries.size()); }
};

std::string manifest_to_json(const DatasetManifest& manifest);
/// `base_dir` is attached to the result; paths inside are not checked here.
DatasetManifest manifest_from_json(std::string_view text, std::filesystem::path base_dir);
DatasetManifest load_manifest(const std::filesystem::path& manifest_file);

struct CorpusOptions {
  std::string name = "synthetic";
  std::size_t max_questions = 64;
};

/// Simulates `n_sessions` viewers in memory. Paths are drawn uniformly from
/// enumerate_paths, profiles cycle through default_profiles() and each
/// session uses model_for_profile(profile, model). Deterministic in `seed`.
std::vector<Session> simulate_corpus(const ScriptGraph& graph, std::size_t n_sessions, std::uint64_t seed,
                                     const SideChannelModel& model, const CorpusOptions& options = {});

/// simulate_corpus, then writes script.json, traces/*.jsonl, truth/*.json and
/// manifest.json under `out_dir`. Throws ValidationError for n_sessions == 0
/// or an invalid graph, Io on write failures.
DatasetManifest build_corpus(const ScriptGraph& graph, std::size_t n_sessions, std::uint64_t seed,
                             const SideChannelModel& model, const std::filesystem::path& out_dir,
                             const CorpusOptions& options = {});

}  // namespace choiceleak
