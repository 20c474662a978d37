#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "qfp/config.hpp"
#include "qfp/sha3.hpp"
#include "qfp/types.hpp"

namespace qfp {

/// The top-S distinct window digests of a query, strictly descending.
struct Fingerprint {
  std::vector<HashDigest> digests;
  // N, the number of windows hashed before deduplication.
  std::size_t source_n = 0;

  std::size_t size() const noexcept { return digests.size(); }
  friend bool operator==(const Fingerprint&, const Fingerprint&) = default;
};

/// floor(v / q) for every pixel element.
std::vector<std::uint8_t> quantize(const QueryImage& img, int q);

/// Number of full windows: floor((n - w) / p) + 1, or 0 when n < w.
std::size_t window_count(std::size_t n, std::size_t w, std::size_t p);

/// SHA3-256(salt || window) for every window qbytes[k*p, k*p + w), in window
/// order. Throws kInputTooSmall when qbytes.size() < w.
std::vector<HashDigest> window_hashes(std::span<const std::uint8_t> qbytes,
                                      std::size_t w, std::size_t p,
                                      const Salt& salt);
std::vector<HashDigest> window_hashes(std::span<const std::uint8_t> qbytes,
                                      std::size_t w, std::size_t p,
                                      const Salt& salt, Sha3Hasher& hasher);

/// Deduplicates `hashes` and keeps the S numerically largest, descending.
Fingerprint select_fingerprint(std::span<const HashDigest> hashes,
                               std::size_t s);

Fingerprint fingerprint(const QueryImage& img, const DetectorConfig& cfg);

/// Stateful variant that keeps one hash context alive across calls.
class Fingerprinter {
 public:
  explicit Fingerprinter(DetectorConfig cfg);

  Fingerprint operator()(const QueryImage& img);
  /// Full window digest list (before selection) for the current salt.
  std::vector<HashDigest> hashes(const QueryImage& img);

  void set_salt(const Salt& salt) { cfg_.salt = salt; }
  const DetectorConfig& config() const { return cfg_; }

 private:
  DetectorConfig cfg_;
  Sha3Hasher hasher_;
};

// BLFP: "BLFP", u8 version = 1, u16 big-endian digest count, digests.
inline constexpr std::size_t kBlfpHeaderBytes = 7;

std::string to_blfp(const Fingerprint& fp);
/// Throws kMalformedData on a bad magic, version, or length. source_n is not
/// stored and is restored as the digest count.
Fingerprint from_blfp(std::string_view bytes);
void write_blfp(std::ostream& out, const Fingerprint& fp);

}  // namespace qfp
