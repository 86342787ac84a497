#include "choiceleak/report.hpp"

#include <map>

#include "choiceleak/error.hpp"
#include "json_util.hpp"

namespace choiceleak {

using detail::ojson;

namespace {

ojson metrics_json(const Metrics& m) {
  ojson j;
  j["per_event_accuracy"] = m.per_event_accuracy;
  j["per_choice_accuracy"] = m.per_choice_accuracy;
  j["path_exact_rate"] = m.path_exact_rate;
  j["event_precision"] = m.event_precision;
  j["confusion"] = {{"truth", {"Type1", "Type2"}},
                    {"counts", {{m.confusion[0][0], m.confusion[0][1]}, {m.confusion[1][0], m.confusion[1][1]}}}};
  j["sessions"] = m.sessions;
  j["control_events"] = m.control_events;
  j["matched_events"] = m.matched_events;
  j["correct_events"] = m.correct_events;
  j["spurious_events"] = m.spurious_events;
  j["decisions"] = m.decisions;
  j["correct_decisions"] = m.correct_decisions;
  j["exact_paths"] = m.exact_paths;
  return j;
}

ojson bands_json(const LengthBands& b) {
  return {{"type1", {b.type1.lo, b.type1.hi}}, {"type2", {b.type2.lo, b.type2.hi}}};
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(Errc::Io, "cannot create '" + dir.string() + "': " + ec.message());
}

}  // namespace

std::vector<ProfileHistogram> profile_histograms(const DatasetManifest& manifest, std::uint32_t bin_width) {
  std::vector<ProfileHistogram> out;
  std::map<std::string, std::size_t> slot;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    const auto& e = manifest.entries[i];
    const Histogram h = length_histogram(load_trace_file(manifest.resolve(e.trace_path).string()), bin_width);
    auto [it, inserted] = slot.emplace(profile_label(e.profile), out.size());
    if (inserted) out.push_back({e.profile, {}});
    accumulate_histogram(out[it->second].histogram, h);
  }
  return out;
}

std::string metrics_to_json(const Metrics& metrics) { return metrics_json(metrics).dump(2) + "\n"; }

std::string confusion_to_csv(const Metrics& m) {
  std::string out = "truth,Type1,Type2\n";
  out += "Type1," + std::to_string(m.confusion[0][0]) + "," + std::to_string(m.confusion[0][1]) + "\n";
  out += "Type2," + std::to_string(m.confusion[1][0]) + "," + std::to_string(m.confusion[1][1]) + "\n";
  return out;
}

std::string defense_report_to_json(const DefenseReport& r) {
  ojson j;
  j["policy"] = ojson::parse(policy_to_json(r.policy));
  j["bands"] = bands_json(r.bands);
  j["chunk_band"] = {r.chunk_band.lo, r.chunk_band.hi};
  j["before"] = metrics_json(r.before);
  j["after"] = metrics_json(r.after);
  j["inseparable_bands"] = r.inseparable;
  j["recalibrated_bands"] = r.recalibrated_bands ? bands_json(*r.recalibrated_bands) : ojson(nullptr);
  j["after_recalibrated"] = r.after_recalibrated ? metrics_json(*r.after_recalibrated) : ojson(nullptr);
  j["window_detection_rate"] = r.window_detection_rate;
  j["session_detection_rate"] = r.session_detection_rate;
  j["timing"] = ojson::array();
  for (const auto& t : r.timing) {
    ojson iv = ojson::array();
    for (const auto& i : t.intervals) iv.push_back({i.start_us, i.end_us});
    j["timing"].push_back({{"trace_id", t.trace_id},
                           {"windows", t.windows},
                           {"windows_flagged", t.windows_flagged},
                           {"intervals", std::move(iv)}});
  }
  return j.dump(2) + "\n";
}

std::string histogram_file_name(const OperationalProfile& profile) {
  return "hist_" + profile_label(profile) + ".csv";
}

std::vector<std::filesystem::path> emit_report(const Metrics& metrics, const std::vector<ProfileHistogram>& histograms,
                                               const std::filesystem::path& dir) {
  ensure_dir(dir);
  std::vector<std::filesystem::path> written;
  auto put = [&](const std::filesystem::path& p, const std::string& body) {
    detail::write_file(p.string(), body);
    written.push_back(p);
  };
  put(dir / "metrics.json", metrics_to_json(metrics));
  put(dir / "confusion.csv", confusion_to_csv(metrics));
  for (const auto& h : histograms) put(dir / histogram_file_name(h.profile), histogram_to_csv(h.histogram));
  return written;
}

std::filesystem::path emit_defense_report(const DefenseReport& report, const std::filesystem::path& dir) {
  ensure_dir(dir);
  const auto p = dir / "defense.json";
  detail::write_file(p.string(), defense_report_to_json(report));
  return p;
}

}  // namespace choiceleak
