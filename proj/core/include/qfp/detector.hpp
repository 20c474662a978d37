#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qfp/config.hpp"
#include "qfp/fingerprint.hpp"
#include "qfp/match_store.hpp"
#include "qfp/types.hpp"

namespace qfp {

struct AttackLabel {
  std::uint32_t trace_id = 0;
  std::uint32_t step = 0;
  friend bool operator==(const AttackLabel&, const AttackLabel&) = default;
};

/// Benign when `attack` is empty.
struct QueryLabel {
  std::optional<AttackLabel> attack;

  bool is_attack() const noexcept { return attack.has_value(); }
  static QueryLabel benign() { return {}; }
  static QueryLabel attack_step(std::uint32_t trace, std::uint32_t step) {
    return {AttackLabel{trace, step}};
  }
  std::string to_string() const;
  friend bool operator==(const QueryLabel&, const QueryLabel&) = default;
};

struct QueryRecord {
  QueryImage image;
  QueryLabel label;
  std::uint64_t timestamp = 0;
  friend bool operator==(const QueryRecord&, const QueryRecord&) = default;
};

enum class Action { kForwarded, kRejected, kError };
std::string_view to_string(Action a);

struct Verdict {
  std::uint64_t timestamp = 0;
  QueryLabel label;
  bool flagged = false;
  std::size_t overlap = 0;
  Action action = Action::kForwarded;
  std::uint32_t epoch = 0;
  std::string error;  // non-empty only for kError
  friend bool operator==(const Verdict&, const Verdict&) = default;
};

using SaltSource = std::function<Salt()>;

/// Deterministic salts from a seed; the n-th call returns salt n.
SaltSource seeded_salt_source(std::uint64_t seed);
/// Salts from the OpenSSL CSPRNG.
SaltSource random_salt_source();

/// Fingerprints each query, consults the store, and rejects flagged queries
/// when mitigation is on. Resets the store with a fresh salt every
/// `cfg.reset_interval` queries.
class Detector {
 public:
  Detector(DetectorConfig cfg, bool mitigation = true,
           SaltSource salts = random_salt_source());

  Verdict process(const QueryRecord& record);
  std::vector<Verdict> process_stream(std::span<const QueryRecord> stream);

  /// Forces a reset now, as the reset policy would.
  void reset();

  const FingerprintIndex& store() const { return store_; }
  const DetectorConfig& config() const { return cfg_; }
  std::uint64_t processed() const { return processed_; }

 private:
  DetectorConfig cfg_;
  bool mitigation_;
  SaltSource salts_;
  Fingerprinter fingerprinter_;
  FingerprintIndex store_;
  std::uint64_t processed_ = 0;
  std::uint64_t since_reset_ = 0;
};

struct TraceMetrics {
  std::uint32_t trace_id = 0;
  std::size_t length = 0;
  bool detected = false;
  std::size_t queries_to_detect = 0;  // 1-based, 0 when not detected
  double coverage = 0.0;
  std::size_t flagged = 0;
  std::size_t forwarded = 0;
  std::size_t required_progress = 0;
  friend bool operator==(const TraceMetrics&, const TraceMetrics&) = default;
};

/// Stream-level metrics. Rates without a population (no traces, no benign
/// queries) are empty.
struct DetectionReport {
  std::vector<TraceMetrics> traces;
  std::size_t benign_count = 0;
  std::size_t benign_flagged = 0;
  std::optional<double> attack_detection_rate;
  std::optional<double> mean_queries_to_detect;
  std::optional<double> mean_coverage;
  std::optional<double> false_positive_rate;
  std::optional<double> attack_success_with_mitigation;
  friend bool operator==(const DetectionReport&, const DetectionReport&) = default;
};

/// `labels[i]` labels `verdicts[i]`; throws kMissingLabels on a size mismatch.
/// `required_progress` maps trace id to the forwarded-query budget a trace
/// needs to succeed; traces absent from it use their length.
DetectionReport compute_metrics(
    std::span<const Verdict> verdicts, std::span<const QueryLabel> labels,
    const std::map<std::uint32_t, std::size_t>& required_progress = {});
/// Uses the labels carried by the verdicts.
DetectionReport compute_metrics(
    std::span<const Verdict> verdicts,
    const std::map<std::uint32_t, std::size_t>& required_progress = {});

void write_verdict_csv(std::ostream& out, std::span<const Verdict> verdicts);
void write_report_csv(std::ostream& out, const DetectionReport& report);
std::string report_to_json(const DetectionReport& report);
DetectionReport report_from_json(std::string_view json);

/// Shortest round-trip decimal form, used by every CSV writer.
std::string format_double(double v);

}  // namespace qfp
