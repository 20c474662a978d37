#include "bench_harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <thread>

#include "qfp/match_store.hpp"
#include "qfp/simulator.hpp"

namespace qfp::tools {

std::vector<Fingerprint> bench_queries(const Dims& dims, std::size_t count,
                                       const DetectorConfig& cfg,
                                       std::uint64_t seed) {
  Fingerprinter fingerprinter(cfg);
  std::vector<Fingerprint> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(fingerprinter(sim::smoothed_noise(dims, derive_seed(seed, i))));
  }
  return out;
}

LatencyStats summarize(std::vector<double> latencies_us) {
  LatencyStats s;
  s.samples = latencies_us.size();
  if (latencies_us.empty()) return s;
  s.mean_us = std::accumulate(latencies_us.begin(), latencies_us.end(), 0.0) /
              static_cast<double>(latencies_us.size());
  const auto rank = static_cast<std::size_t>(
      std::ceil(0.99 * static_cast<double>(latencies_us.size()))) - 1;
  std::nth_element(latencies_us.begin(), latencies_us.begin() + rank, latencies_us.end());
  s.p99_us = latencies_us[rank];
  return s;
}

BenchRow bench_check_and_insert(std::span<const Fingerprint> queries,
                                std::size_t n, const DetectorConfig& cfg,
                                std::uint64_t seed, unsigned threads) {
  threads = std::max(1u, threads);
  const std::size_t s = cfg.fingerprint_size;
  FingerprintIndex store(cfg.threshold, cfg.salt,
                         std::max(cfg.max_fingerprints, n + queries.size()));
  store.reserve(n + queries.size(), s);

  std::mt19937_64 rng(seed);
  Fingerprint fp;
  fp.digests.resize(s);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& d : fp.digests) {
      for (std::size_t b = 0; b < kDigestBytes; b += 8) {
        const std::uint64_t v = rng();
        for (std::size_t j = 0; j < 8; ++j) d.bytes[b + j] = static_cast<std::uint8_t>(v >> (8 * j));
      }
    }
    std::sort(fp.digests.begin(), fp.digests.end(), std::greater<>{});
    fp.source_n = s;
    store.insert(fp);
  }

  std::vector<std::vector<double>> lat(threads);
  auto worker = [&](unsigned t) {
    for (std::size_t i = t; i < queries.size(); i += threads) {
      const auto start = std::chrono::steady_clock::now();
      store.check_and_insert(queries[i]);
      const auto stop = std::chrono::steady_clock::now();
      lat[t].push_back(std::chrono::duration<double, std::micro>(stop - start).count());
    }
  };
  if (threads == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker, t);
    for (auto& th : pool) th.join();
  }

  BenchRow row;
  row.n = n;
  row.trials = queries.size();
  row.threads = threads;
  std::vector<double> all;
  for (auto& v : lat) {
    if (threads > 1) row.per_thread.push_back(summarize(v));
    all.insert(all.end(), v.begin(), v.end());
  }
  row.aggregate = summarize(std::move(all));
  double digests = 0.0;
  for (const auto& q : queries) digests += static_cast<double>(q.size());
  row.bytes_per_fingerprint =
      queries.empty() ? 0.0 : digests * kDigestBytes / static_cast<double>(queries.size());
  row.store_bytes = store.memory_bytes();
  return row;
}

}  // namespace qfp::tools
