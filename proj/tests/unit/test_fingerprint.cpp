#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <string>

#include "oracles.hpp"
#include "qfp/error.hpp"
#include "qfp/fingerprint.hpp"
#include "qfp/sha3.hpp"
#include "qfp/simulator.hpp"

namespace qfp {
namespace {

std::span<const std::uint8_t> bytes_of(const std::string& s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

TEST(Quantize, BucketEdges) {
  QueryImage img(1, 3, 1, {0, 49, 255});
  EXPECT_EQ(quantize(img, 50), (std::vector<std::uint8_t>{0, 0, 5}));
  EXPECT_EQ(quantize(img, 1), img.pixels);
}

TEST(Quantize, AbsorbsSmallChangesAwayFromBoundaries) {
  // Every (v, v +/- delta) pair with delta <= 12 and v at least 13 away from a
  // multiple of 50 lands in the same bucket.
  for (int v = 0; v < 256; ++v) {
    const int r = v % 50;
    if (r < 13 || r > 50 - 13) continue;
    for (int delta = -12; delta <= 12; ++delta) {
      const int u = v + delta;
      if (u < 0 || u > 255) continue;
      QueryImage a(1, 1, 1, {static_cast<std::uint8_t>(v)});
      QueryImage b(1, 1, 1, {static_cast<std::uint8_t>(u)});
      ASSERT_EQ(quantize(a, 50), quantize(b, 50)) << v << " " << u;
    }
  }
}

TEST(WindowCount, Shapes) {
  EXPECT_EQ(window_count(3072, 20, 1), 3053u);
  EXPECT_EQ(window_count(20, 20, 7), 1u);
  EXPECT_EQ(window_count(10, 4, 3), 3u);
  EXPECT_EQ(window_count(19, 20, 1), 0u);
  EXPECT_EQ(window_count(150528, 50, 1), 150479u);
}

TEST(Sha3, KnownVectors) {
  Sha3Hasher h;
  EXPECT_EQ(to_hex(h.digest({}, {}).bytes),
            "a7ffc6f8bf1ed76651c14756a061d662f580ff4de43b49fa82d80a4b80f8434a");
  EXPECT_EQ(to_hex(h.digest({}, bytes_of("abc")).bytes),
            "3a985da74fe225b2045c172d6bd390bd855f086e3e9d525b46bfe24511431532");
  // Salt and message are hashed as one concatenated input.
  EXPECT_EQ(h.digest(bytes_of("a"), bytes_of("bc")), h.digest({}, bytes_of("abc")));
}

TEST(WindowHashes, OffsetsAndSalt) {
  std::vector<std::uint8_t> q{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  Salt salt{};
  salt[0] = 7;
  const auto hashes = window_hashes(q, 4, 3, salt);
  ASSERT_EQ(hashes.size(), 3u);
  Sha3Hasher h;
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_EQ(hashes[k], h.digest(salt, std::span(q).subspan(k * 3, 4)));
  }
  EXPECT_THROW(window_hashes(std::span(q).first(3), 4, 1, salt), Error);
}

TEST(Select, SmallExamples) {
  std::vector<HashDigest> h;
  for (std::uint64_t v : {9, 7, 7, 3, 1}) h.push_back(HashDigest::from_u64(v));
  const auto fp = select_fingerprint(h, 3);
  EXPECT_EQ(fp.digests, (std::vector<HashDigest>{HashDigest::from_u64(9),
                                                 HashDigest::from_u64(7),
                                                 HashDigest::from_u64(3)}));
  EXPECT_EQ(fp.source_n, 5u);
  EXPECT_EQ(select_fingerprint(h, 10).size(), 4u);
}

TEST(Select, MatchesOrderedSetOracle) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<HashDigest> h;
    for (int i = 0; i < 3053; ++i) h.push_back(oracle::random_digest(rng));
    // Duplicates must not take extra slots.
    for (int i = 0; i < 100; ++i) h.push_back(h[rng() % h.size()]);
    EXPECT_EQ(select_fingerprint(h, 50).digests, oracle::select_top(h, 50));
  }
}

TEST(Fingerprint, DeterministicForFixedConfig) {
  const auto img = sim::smoothed_noise(Dims{}, 42);
  DetectorConfig cfg;
  const auto a = fingerprint(img, cfg);
  const auto b = fingerprint(img, cfg);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.size(), 50u);
  EXPECT_EQ(a.source_n, 3053u);
  EXPECT_EQ(to_blfp(a), to_blfp(b));
}

TEST(Fingerprint, QuantizationAbsorbsInBucketEdits) {
  std::mt19937_64 rng(5);
  DetectorConfig cfg;
  Fingerprinter f(cfg);
  for (int trial = 0; trial < 20; ++trial) {
    QueryImage img = sim::smoothed_noise(Dims{}, 100 + trial);
    const auto base = f(img);
    for (auto& v : img.pixels) {
      const int lo = v / 50 * 50;
      v = static_cast<std::uint8_t>(std::min(255, lo + static_cast<int>(rng() % 50)));
    }
    EXPECT_EQ(f(img), base);
  }
}

TEST(Fingerprint, LocalityBound) {
  // Changing k pixels across buckets alters at most k * ceil(w / p) windows.
  std::mt19937_64 rng(9);
  for (std::size_t p : {1u, 3u, 20u}) {
    DetectorConfig cfg;
    cfg.stride = p;
    Fingerprinter f(cfg);
    for (int trial = 0; trial < 10; ++trial) {
      QueryImage img = sim::smoothed_noise(Dims{}, 500 + trial);
      const auto before = f.hashes(img);
      const std::size_t k = 1 + rng() % 5;
      for (std::size_t i = 0; i < k; ++i) {
        auto& v = img.pixels[rng() % img.pixels.size()];
        v = static_cast<std::uint8_t>(v >= 128 ? v - 60 : v + 60);
      }
      const auto after = f.hashes(img);
      std::size_t changed = 0;
      for (std::size_t w = 0; w < before.size(); ++w) changed += before[w] != after[w];
      EXPECT_LE(changed, k * ((cfg.window + p - 1) / p));
    }
  }
}

TEST(Fingerprint, IndependentSaltsShareAlmostNothing) {
  // Under a random oracle the overlap of two salts' top-S sets averages
  // S^2 / N with variance no larger than that.
  DetectorConfig cfg;
  const auto img = sim::smoothed_noise(Dims{}, 77);
  const auto q = quantize(img, cfg.quant_step);
  Sha3Hasher hasher;
  std::mt19937_64 rng(11);
  const int pairs = 1000;
  double sum = 0.0;
  for (int i = 0; i < pairs; ++i) {
    Salt a, b;
    for (auto& x : a) x = static_cast<std::uint8_t>(rng());
    for (auto& x : b) x = static_cast<std::uint8_t>(rng());
    const auto fa = select_fingerprint(window_hashes(q, cfg.window, cfg.stride, a, hasher), 50);
    const auto fb = select_fingerprint(window_hashes(q, cfg.window, cfg.stride, b, hasher), 50);
    sum += static_cast<double>(oracle::overlap(fa, fb));
  }
  const double expected = 50.0 * 50.0 / 3053.0;
  const double sigma = std::sqrt(expected / pairs);
  EXPECT_LE(sum / pairs, expected + 3 * sigma);
}

TEST(Fingerprint, TooSmallImage) {
  QueryImage img(2, 3, 1);
  EXPECT_THROW(fingerprint(img, DetectorConfig{}), Error);
}

}  // namespace
}  // namespace qfp
