// choiceleak: command line front end for simulation, ingestion, the
// classification attack, evaluation and countermeasure experiments.
//
// Exit codes: 0 success, 2 parse or validation error, 3 analysis error,
// 4 I/O error.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "choiceleak/classifier.hpp"
#include "choiceleak/corpus.hpp"
#include "choiceleak/defense.hpp"
#include "choiceleak/error.hpp"
#include "choiceleak/evaluate.hpp"
#include "choiceleak/pcap.hpp"
#include "choiceleak/profile.hpp"
#include "choiceleak/reconstruct.hpp"
#include "choiceleak/report.hpp"
#include "choiceleak/script_graph.hpp"
#include "choiceleak/simulator.hpp"
#include "choiceleak/trace.hpp"

namespace fs = std::filesystem;
using namespace choiceleak;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 2;
constexpr int kExitAnalysis = 3;
constexpr int kExitIo = 4;

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::Io:
      return kExitIo;
    case Errc::InsufficientLabels:
    case Errc::InseparableBands:
    case Errc::EmptySplit:
    case Errc::NoTcpPayload:
      return kExitAnalysis;
    default:
      return kExitInvalid;
  }
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& path, std::string_view body) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot open '" + path.string() + "' for writing");
  out.write(body.data(), static_cast<std::streamsize>(body.size()));
  if (!out) throw Error(Errc::Io, "write failed for '" + path.string() + "'");
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(Errc::Io, "cannot create '" + dir.string() + "': " + ec.message());
}

SideChannelModel base_model(bool noiseless) { return noiseless ? SideChannelModel::noiseless() : SideChannelModel{}; }

struct SimulateArgs {
  std::string script;
  std::string path;
  std::uint64_t seed = 1;
  std::size_t profile_index = 0;
  std::string out;
  bool noiseless = false;
  bool pcap = false;
};

int run_simulate(const SimulateArgs& a) {
  const ScriptGraph graph = load_script_file(a.script);
  const ChoicePath path = parse_path(a.path);
  const auto profiles = default_profiles();
  if (a.profile_index >= profiles.size())
    throw Error(Errc::ValidationError, "profile index must be below " + std::to_string(profiles.size()));
  const OperationalProfile& profile = profiles[a.profile_index];
  const Session s =
      simulate_session(graph, path, profile, model_for_profile(profile, base_model(a.noiseless)), a.seed, "session");
  const fs::path dir(a.out);
  make_dir(dir);
  save_trace_file((dir / "trace.jsonl").string(), s.trace);
  spit(dir / "truth.json", truth_to_json(s.truth));
  if (a.pcap) {
    PcapWriteOptions opts;
    opts.seed = a.seed;
    const auto bytes = write_pcap(s.trace, opts);
    spit(dir / "capture.pcap", std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
  }
  std::cout << "wrote " << s.trace.records.size() << " records, path " << format_path(s.truth.path) << " to "
            << dir.string() << "\n";
  return kExitOk;
}

struct CorpusArgs {
  std::string script;
  std::size_t n = 100;
  std::uint64_t seed = 1;
  std::string out;
  std::string name = "synthetic";
  bool noiseless = false;
};

int run_corpus(const CorpusArgs& a) {
  const ScriptGraph graph = load_script_file(a.script);
  CorpusOptions opts;
  opts.name = a.name;
  const DatasetManifest m = build_corpus(graph, a.n, a.seed, base_model(a.noiseless), a.out, opts);
  std::cout << "wrote " << m.entries.size() << " sessions to " << (fs::path(a.out) / "manifest.json").string()
            << "\n";
  return kExitOk;
}

struct IngestArgs {
  std::string pcap;
  std::string client = "first-syn";
  std::string out;
};

int run_ingest(const IngestArgs& a) {
  const Trace t = ingest_pcap_file(a.pcap, ClientSelector::parse(a.client));
  spit(a.out, write_trace(t));
  std::cout << "ingested " << t.records.size() << " records";
  if (t.meta.reassembly_gaps && *t.meta.reassembly_gaps > 0)
    std::cout << " (" << *t.meta.reassembly_gaps << " streams cut at a gap)";
  std::cout << "\n";
  return kExitOk;
}

struct CalibrateArgs {
  std::string manifest;
  double fraction = kDefaultCalibrationFraction;
  std::string out;
};

int run_calibrate(const CalibrateArgs& a) {
  const DatasetManifest m = load_manifest(a.manifest);
  const std::size_t n = calibration_count(m.entries.size(), a.fraction);
  if (n == 0) throw Error(Errc::EmptySplit, "calibration split is empty");
  const LengthBands bands = calibrate_bands(m.load_sessions(0, n));
  spit(a.out, bands_to_json(bands));
  std::cout << "type1 [" << bands.type1.lo << "," << bands.type1.hi << "] type2 [" << bands.type2.lo << ","
            << bands.type2.hi << "] from " << n << " sessions\n";
  return kExitOk;
}

struct ClassifyArgs {
  std::string trace;
  std::string bands;
  std::string out;
};

int run_classify(const ClassifyArgs& a) {
  const Trace t = load_trace_file(a.trace);
  const LengthBands bands = bands_from_json(slurp(a.bands));
  const auto events = classify_events(t, bands);
  spit(a.out, events_to_json(events, t.meta.trace_id));
  std::cout << events.size() << " control events\n";
  return kExitOk;
}

struct ReconstructArgs {
  std::string events;
  std::string script;
  std::string out;
};

int run_reconstruct(const ReconstructArgs& a) {
  const auto events = events_from_json(slurp(a.events));
  const ScriptGraph graph = load_script_file(a.script);
  const Reconstruction r = reconstruct_path(events, graph);
  const double score = consistency_score(r, events, graph);
  spit(a.out, reconstruction_to_json(r, score));
  std::cout << format_path(r.path) << " (consistency " << score << ")\n";
  return kExitOk;
}

struct EvalArgs {
  std::string manifest;
  double fraction = kDefaultCalibrationFraction;
  std::string report;
  std::uint32_t bin = 10;
};

void print_metrics(const char* label, const Metrics& m) {
  std::cout << label << "per_event_accuracy " << m.per_event_accuracy << ", per_choice_accuracy "
            << m.per_choice_accuracy << ", path_exact_rate " << m.path_exact_rate << " over " << m.sessions
            << " sessions\n";
}

int run_eval(const EvalArgs& a) {
  const DatasetManifest m = load_manifest(a.manifest);
  const Metrics metrics = evaluate_pipeline(m, a.fraction);
  print_metrics("", metrics);
  if (!a.report.empty()) {
    const auto hists = a.bin > 0 ? profile_histograms(m, a.bin) : std::vector<ProfileHistogram>{};
    const auto files = emit_report(metrics, hists, a.report);
    std::cout << "wrote " << files.size() << " report files to " << a.report << "\n";
  }
  return kExitOk;
}

struct DefendArgs {
  std::string manifest;
  std::string policy_file;
  std::string kind;
  std::uint32_t pad_to = 1024;
  std::vector<std::uint32_t> buckets;
  std::uint32_t unit = 400;
  double ratio_lo = 0.5;
  double ratio_hi = 1.0;
  std::uint64_t seed = 0;
  std::string bands;
  double fraction = kDefaultCalibrationFraction;
  double gap_factor = kDefaultGapFactor;
  std::string report;
};

DefensePolicy policy_from_args(const DefendArgs& a) {
  if (!a.policy_file.empty()) return policy_from_json(slurp(a.policy_file));
  if (a.kind == "PadFixed") return DefensePolicy::pad_fixed(a.pad_to);
  if (a.kind == "PadBuckets") return DefensePolicy::pad_buckets(a.buckets);
  if (a.kind == "Split") return DefensePolicy::split(a.unit);
  if (a.kind == "Compress") return DefensePolicy::compress(a.ratio_lo, a.ratio_hi, a.seed);
  throw Error(Errc::BadPolicy, "unknown policy kind '" + a.kind + "'");
}

int run_defend(const DefendArgs& a) {
  const DefensePolicy policy = policy_from_args(a);
  validate_policy(policy);
  const DatasetManifest m = load_manifest(a.manifest);
  const LengthBands bands = bands_from_json(slurp(a.bands));
  const DefenseReport r = evaluate_defense(m, policy, bands, a.fraction, a.gap_factor);
  print_metrics("before: ", r.before);
  print_metrics("after:  ", r.after);
  if (r.inseparable)
    std::cout << "recalibration on defended traces: InseparableBands\n";
  else
    print_metrics("after recalibration: ", *r.after_recalibrated);
  std::cout << "timing: windows flagged " << r.window_detection_rate << ", sessions fully flagged "
            << r.session_detection_rate << "\n";
  if (!a.report.empty()) std::cout << "wrote " << emit_defense_report(r, a.report).string() << "\n";
  return kExitOk;
}

struct HistArgs {
  std::string trace;
  std::uint32_t bin = 10;
  std::string out;
};

int run_hist(const HistArgs& a) {
  const Trace t = load_trace_file(a.trace);
  const Histogram h = length_histogram(t, a.bin);
  spit(a.out, histogram_to_csv(h));
  std::cout << h.size() << " bins\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Choice-path inference from encrypted interactive-video traffic"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Simulate one viewing session");
  c_sim->add_option("--script", sim.script, "Script graph JSON")->required();
  c_sim->add_option("--path", sim.path, "Choice path, e.g. Q1=D,Q2=A")->required();
  c_sim->add_option("--seed", sim.seed, "RNG seed");
  c_sim->add_option("--profile-index", sim.profile_index, "Index into the default profile list");
  c_sim->add_option("--out", sim.out, "Output directory")->required();
  c_sim->add_flag("--noiseless", sim.noiseless, "Zero jitter and no background records");
  c_sim->add_flag("--pcap", sim.pcap, "Also write capture.pcap");

  CorpusArgs corp;
  auto* c_corpus = app.add_subcommand("corpus", "Build a labelled synthetic corpus");
  c_corpus->add_option("--script", corp.script, "Script graph JSON")->required();
  c_corpus->add_option("--n", corp.n, "Number of sessions");
  c_corpus->add_option("--seed", corp.seed, "RNG seed");
  c_corpus->add_option("--out", corp.out, "Output directory")->required();
  c_corpus->add_option("--name", corp.name, "Corpus name");
  c_corpus->add_flag("--noiseless", corp.noiseless, "Zero jitter and no background records");

  IngestArgs ing;
  auto* c_ingest = app.add_subcommand("ingest", "Turn a pcap capture into a record trace");
  c_ingest->add_option("--pcap", ing.pcap, "Capture file")->required();
  c_ingest->add_option("--client", ing.client, "Viewer endpoint ADDR[:PORT] or first-syn");
  c_ingest->add_option("--out", ing.out, "Trace JSONL")->required();

  CalibrateArgs cal;
  auto* c_cal = app.add_subcommand("calibrate", "Fit length bands on the calibration split");
  c_cal->add_option("--manifest", cal.manifest, "Corpus manifest")->required();
  c_cal->add_option("--fraction", cal.fraction, "Calibration fraction");
  c_cal->add_option("--out", cal.out, "Bands JSON")->required();

  ClassifyArgs cls;
  auto* c_cls = app.add_subcommand("classify", "Label control records in a trace");
  c_cls->add_option("--trace", cls.trace, "Trace JSONL")->required();
  c_cls->add_option("--bands", cls.bands, "Bands JSON")->required();
  c_cls->add_option("--out", cls.out, "Events JSON")->required();

  ReconstructArgs rec;
  auto* c_rec = app.add_subcommand("reconstruct", "Recover the choice path from events");
  c_rec->add_option("--events", rec.events, "Events JSON")->required();
  c_rec->add_option("--script", rec.script, "Script graph JSON")->required();
  c_rec->add_option("--out", rec.out, "Reconstruction JSON")->required();

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "Calibrate, classify, reconstruct and score a corpus");
  c_eval->add_option("--manifest", ev.manifest, "Corpus manifest")->required();
  c_eval->add_option("--fraction", ev.fraction, "Calibration fraction");
  c_eval->add_option("--report", ev.report, "Report directory");
  c_eval->add_option("--bin", ev.bin, "Histogram bin width; 0 disables histograms");

  DefendArgs def;
  auto* c_def = app.add_subcommand("defend", "Evaluate a countermeasure on a corpus");
  c_def->add_option("--manifest", def.manifest, "Corpus manifest")->required();
  auto* o_policy = c_def->add_option("--policy", def.policy_file, "Policy JSON");
  auto* o_kind = c_def->add_option("--kind", def.kind, "PadFixed, PadBuckets, Split or Compress");
  o_policy->excludes(o_kind);
  c_def->add_option("--pad-to", def.pad_to, "PadFixed target length");
  c_def->add_option("--buckets", def.buckets, "PadBuckets ascending sizes")->delimiter(',');
  c_def->add_option("--unit", def.unit, "Split unit");
  c_def->add_option("--ratio-lo", def.ratio_lo, "Compress ratio lower bound");
  c_def->add_option("--ratio-hi", def.ratio_hi, "Compress ratio upper bound");
  c_def->add_option("--seed", def.seed, "Compress seed");
  c_def->add_option("--bands", def.bands, "Attacker bands JSON")->required();
  c_def->add_option("--fraction", def.fraction, "Calibration fraction");
  c_def->add_option("--gap-factor", def.gap_factor, "Timing probe gap factor");
  c_def->add_option("--report", def.report, "Report directory");

  HistArgs hist;
  auto* c_hist = app.add_subcommand("hist", "Client record length histogram as CSV");
  c_hist->add_option("--trace", hist.trace, "Trace JSONL")->required();
  c_hist->add_option("--bin", hist.bin, "Bin width");
  c_hist->add_option("--out", hist.out, "CSV output")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (*c_sim) return run_simulate(sim);
    if (*c_corpus) return run_corpus(corp);
    if (*c_ingest) return run_ingest(ing);
    if (*c_cal) return run_calibrate(cal);
    if (*c_cls) return run_classify(cls);
    if (*c_rec) return run_reconstruct(rec);
    if (*c_eval) return run_eval(ev);
    if (*c_def) {
      if (def.policy_file.empty() && def.kind.empty()) {
        std::cerr << "defend: one of --policy or --kind is required\n";
        return kExitInvalid;
      }
      return run_defend(def);
    }
    if (*c_hist) return run_hist(hist);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  }
  return kExitInvalid;
}
