#include <benchmark/benchmark.h>

#include <algorithm>
#include <random>

#include "qfp/match_store.hpp"

namespace {

qfp::Fingerprint random_fingerprint(std::mt19937_64& rng, std::size_t s) {
  qfp::Fingerprint fp;
  fp.digests.resize(s);
  for (auto& d : fp.digests) {
    for (auto& b : d.bytes) b = static_cast<std::uint8_t>(rng());
  }
  std::sort(fp.digests.begin(), fp.digests.end(), std::greater<>{});
  fp.source_n = s;
  return fp;
}

// Stored fingerprints = range(0); each timed query is fresh and inserted.
void BM_CheckAndInsert(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(7);
  qfp::FingerprintIndex store(25);
  store.reserve(n + 100000, 50);
  for (std::size_t i = 0; i < n; ++i) store.insert(random_fingerprint(rng, 50));

  std::vector<qfp::Fingerprint> queries;
  for (int i = 0; i < 4096; ++i) queries.push_back(random_fingerprint(rng, 50));
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(store.check_and_insert(queries[i++ % queries.size()]));
  }
  state.counters["bytes_per_fp"] =
      static_cast<double>(store.memory_bytes()) / static_cast<double>(store.size());
}
BENCHMARK(BM_CheckAndInsert)->Arg(1000)->Arg(10000)->Arg(100000)->Iterations(100000);

void BM_MaxOverlapNearDuplicate(benchmark::State& state) {
  std::mt19937_64 rng(9);
  qfp::FingerprintIndex store(25);
  const auto base = random_fingerprint(rng, 50);
  for (int i = 0; i < state.range(0); ++i) store.insert(base);
  for (auto _ : state) {
    benchmark::DoNotOptimize(store.max_overlap(base));
  }
}
BENCHMARK(BM_MaxOverlapNearDuplicate)->Arg(10)->Arg(1000);

}  // namespace
