#include <benchmark/benchmark.h>

#include <cstdint>
#include <random>
#include <vector>

#include "choiceleak/classifier.hpp"
#include "choiceleak/pcap.hpp"
#include "choiceleak/reconstruct.hpp"
#include "choiceleak/simulator.hpp"
#include "choiceleak/tls.hpp"

using namespace choiceleak;

namespace {

std::vector<std::uint8_t> record_stream(std::size_t records) {
  std::mt19937_64 rng(1);
  std::vector<std::uint8_t> out;
  for (std::size_t i = 0; i < records; ++i) {
    const auto len = static_cast<std::uint16_t>(rng() % 16384 + 1);
    out.insert(out.end(), {23, 3, 3, static_cast<std::uint8_t>(len >> 8), static_cast<std::uint8_t>(len)});
    out.resize(out.size() + len, 0xab);
  }
  return out;
}

void BM_ExtractTlsRecords(benchmark::State& state) {
  const auto stream = record_stream(static_cast<std::size_t>(state.range(0)));
  const ByteTimeline times;
  for (auto _ : state) benchmark::DoNotOptimize(extract_tls_records(stream, times));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * stream.size()));
}
BENCHMARK(BM_ExtractTlsRecords)->Arg(64)->Arg(1024);

void BM_IngestPcap(benchmark::State& state) {
  const auto g = make_chain_script(5, 20000, 250);
  const auto s = simulate_session(g, parse_path("Q1=A,Q2=D,Q3=A,Q4=D,Q5=A"), {}, SideChannelModel{}, 3);
  const auto capture = write_pcap(s.trace);
  for (auto _ : state) benchmark::DoNotOptimize(ingest_pcap(capture, ClientSelector::first_syn_sender()));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * capture.size()));
}
BENCHMARK(BM_IngestPcap);

void BM_SimulateSession(benchmark::State& state) {
  const auto g = make_chain_script(static_cast<std::size_t>(state.range(0)), 20000, 250);
  const auto paths = enumerate_paths(g, 16);
  std::uint64_t seed = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(simulate_session(g, paths[seed % paths.size()], {}, SideChannelModel{}, seed));
    ++seed;
  }
}
BENCHMARK(BM_SimulateSession)->Arg(5)->Arg(10);

void BM_ClassifyAndReconstruct(benchmark::State& state) {
  const auto g = make_chain_script(5, 20000, 250);
  const auto s = simulate_session(g, parse_path("Q1=A,Q2=D,Q3=A,Q4=D,Q5=A"), {}, SideChannelModel{}, 9);
  const LengthBands bands{{702, 718}, {902, 918}};
  for (auto _ : state) benchmark::DoNotOptimize(reconstruct_path(classify_events(s.trace, bands), g));
}
BENCHMARK(BM_ClassifyAndReconstruct);

}  // namespace

BENCHMARK_MAIN();
