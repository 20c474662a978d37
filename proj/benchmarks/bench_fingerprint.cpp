#include <benchmark/benchmark.h>

#include "qfp/fingerprint.hpp"
#include "qfp/simulator.hpp"

namespace {

void BM_Fingerprint(benchmark::State& state) {
  const qfp::Dims dims{static_cast<std::uint16_t>(state.range(0)),
                       static_cast<std::uint16_t>(state.range(0)), 3};
  qfp::DetectorConfig cfg;
  qfp::Fingerprinter fingerprinter(cfg);
  const auto img = qfp::sim::smoothed_noise(dims, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(fingerprinter(img));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Fingerprint)->Arg(32)->Arg(64)->Unit(benchmark::kMicrosecond);

void BM_Quantize(benchmark::State& state) {
  const auto img = qfp::sim::smoothed_noise(qfp::Dims{}, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(qfp::quantize(img, 50));
  }
}
BENCHMARK(BM_Quantize);

}  // namespace
