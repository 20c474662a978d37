#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qfp/config.hpp"
#include "qfp/detector.hpp"
#include "qfp/types.hpp"

namespace qfp::sim {

enum class TraceKind {
  kProbePair,      // antithetic probes x0 +/- sigma*u around a source image
  kInterpolation,  // bisection along the segment between a start point and x0
  kPatchFlip,      // small pixel blocks pushed toward +/- budget
};

std::string_view to_string(TraceKind kind);
std::optional<TraceKind> parse_trace_kind(std::string_view name);

struct TraceSpec {
  TraceKind kind = TraceKind::kProbePair;
  std::size_t length = 200;
  // L-infinity bound in 8-bit intensity units: every query after the first is
  // within `budget` of some earlier query of the trace.
  double budget = 12.0;
  std::uint64_t seed = 0;
  Dims dims{};
  // ProbePair sampling scale in intensity units, capped at budget / 2.
  double probe_sigma = 1.0;
  // PatchFlip block edge in pixels.
  std::uint16_t patch = 4;
};

struct ExperimentSpec {
  std::size_t benign_count = 0;
  Dims dims{};
  std::uint64_t benign_seed = 1;
  std::vector<TraceSpec> traces;
  std::uint64_t interleave_seed = 7;
  std::uint64_t salt_seed = 11;  // salts for the store and every reset
  DetectorConfig detector{};
  bool mitigation = true;
};

/// Smoothed-noise image: uniform noise, 3x3 box filter per channel (edges
/// average the in-bounds neighbours), rounded to 8 bits.
QueryImage smoothed_noise(const Dims& dims, std::uint64_t seed);

/// `count` smoothed-noise benign records; image i is seeded by (seed, i).
std::vector<QueryRecord> gen_benign(std::size_t count, const Dims& dims,
                                    std::uint64_t seed);

/// Queries are built around the source image
/// smoothed_noise(dims, derive_seed(seed, 0)). Throws kBudgetInfeasible when
/// budget < 1, kInvalidConfig when length < 2. Asserts the min-distance
/// property of the result.
std::vector<QueryRecord> gen_attack_trace(const TraceSpec& spec,
                                          std::uint32_t trace_id);

/// Maximum over i >= 1 of min_{j<i} ||x_i - x_j||_inf.
double max_nearest_prior_distance(const std::vector<QueryRecord>& trace);

/// Benign records and every trace merged by a seeded shuffle that keeps each
/// trace in step order; timestamps are reassigned 0..n-1.
std::vector<QueryRecord> build_stream(const ExperimentSpec& spec);

struct ExperimentResult {
  std::vector<QueryRecord> stream;
  std::vector<Verdict> verdicts;
  DetectionReport report;
};

ExperimentResult run_experiment_detailed(const ExperimentSpec& spec);
DetectionReport run_experiment(const ExperimentSpec& spec);
/// Runs an existing stream through the detector configured by `spec`.
ExperimentResult run_stream(const ExperimentSpec& spec,
                            std::vector<QueryRecord> stream);

struct PauseResumeResult {
  std::vector<std::size_t> cycles;  // per trace, in spec order
  double mean_cycles = 0.0;
};

/// Reset epochs an attacker needs to get a whole trace forwarded when it
/// stops at the first rejection and resumes with that query after the next
/// reset. An epoch also ends after `reset_interval` forwarded queries.
std::size_t pause_resume_cycles(const std::vector<QueryRecord>& trace,
                                const DetectorConfig& cfg,
                                std::uint64_t reset_interval,
                                std::uint64_t salt_seed);
PauseResumeResult pause_resume(const ExperimentSpec& spec,
                               std::uint64_t reset_interval);

struct EvasionResult {
  // 1-based index of the query whose cumulative perturbation first exceeds
  // the budget; empty when max_queries ran out first.
  std::optional<std::size_t> exhausted_at;
  std::size_t queries = 0;
  std::size_t pixel_changes = 0;
  double final_l2 = 0.0;
};

/// Oracle attacker that, per query, changes pixels by multiples of q (so the
/// change survives quantization), placed greedily to break whole runs of
/// windows, until the query's fingerprint shares at most K digests with
/// every earlier query. Changes accumulate; the perturbation is measured as
/// ||x - x0||_2 / (255 sqrt(|x|)) against `budget`.
EvasionResult guided_evasion_cost(const DetectorConfig& cfg, const Dims& dims,
                                  std::size_t k, double budget,
                                  std::uint64_t seed,
                                  std::size_t max_queries = 5000);

/// Flat key=value experiment description. Keys: benign_count, dims,
/// benign_seed, interleave_seed, salt_seed, mitigation (on/off), the detector
/// keys of parse_config, `trace = kind length budget seed` (repeatable), and
/// the shorthand trace_count/trace_kind/trace_length/trace_budget/trace_seed
/// for homogeneous traces seeded trace_seed + i.
ExperimentSpec parse_experiment(const KeyValueFile& kv);
ExperimentSpec load_experiment(const std::string& path);
std::string format_experiment(const ExperimentSpec& spec);

}  // namespace qfp::sim
