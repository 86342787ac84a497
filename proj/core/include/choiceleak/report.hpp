#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "choiceleak/classifier.hpp"
#include "choiceleak/corpus.hpp"
#include "choiceleak/evaluate.hpp"
#include "choiceleak/profile.hpp"

namespace choiceleak {

struct ProfileHistogram {
  OperationalProfile profile;
  Histogram histogram;
};

/// One histogram per distinct profile label, in first-seen manifest order.
std::vector<ProfileHistogram> profile_histograms(const DatasetManifest& manifest, std::uint32_t bin_width);

std::string metrics_to_json(const Metrics& metrics);
/// "truth,Type1,Type2" header, one row per truth kind.
std::string confusion_to_csv(const Metrics& metrics);
std::string defense_report_to_json(const DefenseReport& report);

/// File name for a profile histogram: hist_<profile_label>.csv.
std::string histogram_file_name(const OperationalProfile& profile);

/// Writes metrics.json, confusion.csv and one histogram CSV per entry into
/// `dir`, creating it if needed. Returns the written paths. Throws Io.
std::vector<std::filesystem::path> emit_report(const Metrics& metrics, const std::vector<ProfileHistogram>& histograms,
                                               const std::filesystem::path& dir);

/// Writes defense.json into `dir`. Throws Io.
std::filesystem::path emit_defense_report(const DefenseReport& report, const std::filesystem::path& dir);

}  // namespace choiceleak
