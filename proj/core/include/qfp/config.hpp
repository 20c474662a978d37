#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "qfp/types.hpp"

namespace qfp {

/// Every tunable of the detector. Defaults are the small-image defaults
/// (q=50, w=20, p=1, S=50, T=25).
struct DetectorConfig {
  int quant_step = 50;              // q, 1..255
  std::size_t window = 20;          // w, pixels per sliding window
  std::size_t stride = 1;           // p, 1 <= p <= w
  std::size_t fingerprint_size = 50;  // S
  std::size_t threshold = 25;       // T, flag iff overlap > T
  Salt salt{};
  std::optional<std::uint64_t> reset_interval;  // in queries
  std::size_t max_fingerprints = 10'000'000;
  // When false, a flagged query's fingerprint is not stored.
  bool insert_flagged = true;

  /// Throws kInvalidConfig unless q >= 1, 1 <= p <= w, S >= 1 and T < S.
  void validate() const;

  friend bool operator==(const DetectorConfig&, const DetectorConfig&) = default;
};

enum class Task { kMnist, kGtsrb, kCifar10, kImagenet };

std::optional<Task> parse_task(std::string_view name);
/// Per-task defaults: w=50 for MNIST and ImageNet, w=20 otherwise.
DetectorConfig config_for_task(Task task);
Dims dims_for_task(Task task);

/// Flat `key=value` text. Blank lines and lines starting with '#' are
/// ignored. Repeated keys keep every value in order.
class KeyValueFile {
 public:
  static KeyValueFile parse(std::istream& in);
  static KeyValueFile parse(std::string_view text);

  std::optional<std::string> get(std::string_view key) const;
  std::vector<std::string> get_all(std::string_view key) const;
  const std::multimap<std::string, std::string, std::less<>>& entries() const {
    return entries_;
  }

 private:
  std::multimap<std::string, std::string, std::less<>> entries_;
};

/// Reads q, w, p, s, t, salt_hex and the optional reset_interval,
/// max_fingerprints and insert_flagged keys on top of `base`. Unknown keys
/// are rejected when `strict`.
DetectorConfig parse_config(const KeyValueFile& kv,
                            const DetectorConfig& base = {},
                            bool strict = true);
DetectorConfig load_config(const std::string& path);
std::string format_config(const DetectorConfig& cfg);

}  // namespace qfp
