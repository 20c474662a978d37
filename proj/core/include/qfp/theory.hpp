#pragma once

#include <cstddef>
#include <cstdint>

namespace qfp::theory {

/// Parameters of the flagging-probability bounds for a query pair whose full
/// hash sets (N entries each) differ by D entries per side.
struct BoundParams {
  std::size_t n = 3053;  // full hash set size
  std::size_t d = 0;     // per-side difference
  std::size_t s = 50;    // fingerprint size
  std::size_t t = 25;    // matching threshold

  /// Throws kDomainError unless d <= n, 0 < s <= n and t < s.
  void validate() const;
};

/// ln C(n, k). Exact summation of log ratios when min(k, n-k) is small,
/// log-gamma otherwise. Throws kDomainError when k > n.
double log_binomial(std::int64_t n, std::int64_t k);

/// Upper bound: hypergeometric tail
///   sum_{k=T+1}^{min(S, N-D)} C(N-D, k) C(D, S-k) / C(N, S),
/// summed in log space.
double q_upper(const BoundParams& p);

enum class LowerVariant {
  // The published per-overlap case count, whose inner sum repeats the
  // C(D, S-i) factor.
  kVerbatim,
  // The same count with the inner factor indexed by t, C(D, S-t).
  kAlt,
};

struct LowerBound {
  double value = 0.0;
  bool degenerate = false;  // every case count was zero
};

/// Lower bound sum_{k>T} A_k / sum_i A_i with
///   A_i = C(D,S-i) C(N-D,i) (C(D,S-i) + 2 sum_{t=i+1}^{min(S,N-D)}
///         C(N-D-i, t-i) C(D, S-i or S-t)).
LowerBound q_lower_detail(const BoundParams& p,
                          LowerVariant variant = LowerVariant::kVerbatim);
double q_lower(const BoundParams& p);
double q_lower_alt(const BoundParams& p);

struct MonteCarloEstimate {
  double estimate = 0.0;
  double stderr_ = 0.0;
  std::size_t trials = 0;
  std::size_t flagged = 0;
};

/// Empirical flagging probability under top-S selection: each trial draws
/// N-D shared and D per-side unique values with IID uniform order (64 random
/// bits plus a unique index, so values never collide), keeps the S largest
/// per side and counts overlaps > T. Trial i uses a seed derived from
/// (seed, i), so results do not depend on `threads`.
/// Throws kDomainError when trials < 1000.
MonteCarloEstimate monte_carlo_q(const BoundParams& p, std::size_t trials,
                                 std::uint64_t seed, unsigned threads = 0);

struct DeltaModel {
  std::size_t delta_benign = 2500;
  std::size_t delta_attack = 100;
};

struct Bounds {
  double lower = 0.0;
  double upper = 0.0;
};

struct FprDetection {
  Bounds false_positive;  // Q at delta_benign
  Bounds detection;       // Q at delta_attack
};

/// `base.d` is ignored. Throws kDomainError unless
/// delta_benign > delta_attack and both are valid D values.
FprDetection fpr_and_detection(const DeltaModel& model, const BoundParams& base);

}  // namespace qfp::theory
