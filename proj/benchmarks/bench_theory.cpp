#include <benchmark/benchmark.h>

#include "qfp/theory.hpp"

namespace {

void BM_QUpper(benchmark::State& state) {
  qfp::theory::BoundParams p;
  p.n = static_cast<std::size_t>(state.range(0));
  p.d = p.n / 20;
  for (auto _ : state) {
    benchmark::DoNotOptimize(qfp::theory::q_upper(p));
  }
}
BENCHMARK(BM_QUpper)->Arg(3053)->Arg(150479);

void BM_QLower(benchmark::State& state) {
  qfp::theory::BoundParams p;
  p.d = 100;
  for (auto _ : state) {
    benchmark::DoNotOptimize(qfp::theory::q_lower(p));
  }
}
BENCHMARK(BM_QLower);

void BM_MonteCarlo(benchmark::State& state) {
  qfp::theory::BoundParams p;
  p.d = 100;
  for (auto _ : state) {
    benchmark::DoNotOptimize(qfp::theory::monte_carlo_q(p, 1000, 1, 1));
  }
}
BENCHMARK(BM_MonteCarlo)->Unit(benchmark::kMillisecond);

}  // namespace
