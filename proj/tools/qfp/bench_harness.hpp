#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "qfp/config.hpp"
#include "qfp/fingerprint.hpp"
#include "qfp/types.hpp"

namespace qfp::tools {

struct LatencyStats {
  double mean_us = 0.0;
  double p99_us = 0.0;
  std::size_t samples = 0;
};

struct BenchRow {
  std::size_t n = 0;  // fingerprints stored before timing
  std::size_t trials = 0;
  unsigned threads = 1;
  LatencyStats aggregate;
  std::vector<LatencyStats> per_thread;  // empty when threads == 1
  double bytes_per_fingerprint = 0.0;    // serialized digest payload
  std::size_t store_bytes = 0;
};

/// Fingerprints of `count` fresh smoothed-noise images.
std::vector<Fingerprint> bench_queries(const Dims& dims, std::size_t count,
                                       const DetectorConfig& cfg,
                                       std::uint64_t seed);

/// Fills a store with `n` random S-digest fingerprints, then times
/// check_and_insert for every query. With threads > 1 the queries are split
/// round-robin across threads sharing the store.
BenchRow bench_check_and_insert(std::span<const Fingerprint> queries,
                                std::size_t n, const DetectorConfig& cfg,
                                std::uint64_t seed, unsigned threads = 1);

LatencyStats summarize(std::vector<double> latencies_us);

}  // namespace qfp::tools
