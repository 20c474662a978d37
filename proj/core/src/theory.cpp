#include "qfp/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "qfp/error.hpp"
#include "qfp/types.hpp"

namespace qfp::theory {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Running log-sum-exp.
class LogSum {
 public:
  void add(double x) {
    if (x == kNegInf) return;
    terms_.push_back(x);
    max_ = std::max(max_, x);
  }
  double log() const {
    if (terms_.empty()) return kNegInf;
    double sum = 0.0;
    for (double t : terms_) sum += std::exp(t - max_);
    return max_ + std::log(sum);
  }
  // exp(log()) without the round trip through log when possible, so a single
  // zero term gives exactly 1.
  double value() const {
    if (terms_.empty()) return 0.0;
    double sum = 0.0;
    for (double t : terms_) sum += std::exp(t - max_);
    return std::exp(max_) * sum;
  }

 private:
  std::vector<double> terms_;
  double max_ = kNegInf;
};

double log_binomial_or_zero(std::int64_t n, std::int64_t k) {
  if (k < 0 || k > n) return kNegInf;
  return log_binomial(n, k);
}

using I = std::int64_t;

}  // namespace

void BoundParams::validate() const {
  if (d > n) throw Error(ErrorCode::kDomainError, "D must be <= N");
  if (s == 0 || s > n) throw Error(ErrorCode::kDomainError, "S must be in [1, N]");
  if (t >= s) throw Error(ErrorCode::kDomainError, "T must be < S");
}

double log_binomial(std::int64_t n, std::int64_t k) {
  if (n < 0 || k < 0 || k > n) {
    throw Error(ErrorCode::kDomainError,
                "log_binomial(" + std::to_string(n) + ", " + std::to_string(k) +
                    ") is undefined");
  }
  const std::int64_t m = std::min(k, n - k);
  if (m == 0) return 0.0;
  if (m <= 64) {
    // Each ratio is >= 2, so every term carries full relative precision.
    double sum = 0.0;
    for (std::int64_t i = 1; i <= m; ++i) {
      sum += std::log(static_cast<double>(n - m + i) / static_cast<double>(i));
    }
    return sum;
  }
  return std::lgamma(static_cast<double>(n) + 1.0) -
         std::lgamma(static_cast<double>(k) + 1.0) -
         std::lgamma(static_cast<double>(n - k) + 1.0);
}

double q_upper(const BoundParams& p) {
  p.validate();
  const I n = static_cast<I>(p.n), d = static_cast<I>(p.d);
  const I s = static_cast<I>(p.s), t = static_cast<I>(p.t);
  const I hi = std::min(s, n - d);
  const I lo = std::max(t + 1, s - d);
  if (lo > hi) return 0.0;
  const double total = log_binomial(n, s);
  LogSum sum;
  for (I k = lo; k <= hi; ++k) {
    sum.add(log_binomial(n - d, k) + log_binomial(d, s - k) - total);
  }
  return std::clamp(sum.value(), 0.0, 1.0);
}

LowerBound q_lower_detail(const BoundParams& p, LowerVariant variant) {
  p.validate();
  const I n = static_cast<I>(p.n), d = static_cast<I>(p.d);
  const I s = static_cast<I>(p.s), t = static_cast<I>(p.t);
  const I hi = std::min(s, n - d);
  const double log2 = std::log(2.0);

  LogSum numerator, denominator;
  for (I i = 0; i <= hi; ++i) {
    const double c_unique = log_binomial_or_zero(d, s - i);
    if (c_unique == kNegInf) continue;
    const double c_shared = log_binomial(n - d, i);
    LogSum bracket;
    bracket.add(c_unique);
    for (I tt = i + 1; tt <= hi; ++tt) {
      const double factor = variant == LowerVariant::kVerbatim
                                ? c_unique
                                : log_binomial_or_zero(d, s - tt);
      if (factor == kNegInf) continue;
      bracket.add(log2 + log_binomial(n - d - i, tt - i) + factor);
    }
    const double log_a = c_unique + c_shared + bracket.log();
    denominator.add(log_a);
    if (i >= t + 1) numerator.add(log_a);
  }

  LowerBound out;
  const double den = denominator.log();
  if (den == kNegInf) {
    out.degenerate = true;
    return out;
  }
  const double num = numerator.log();
  out.value = num == kNegInf ? 0.0 : std::clamp(std::exp(num - den), 0.0, 1.0);
  return out;
}

double q_lower(const BoundParams& p) {
  return q_lower_detail(p, LowerVariant::kVerbatim).value;
}

double q_lower_alt(const BoundParams& p) {
  return q_lower_detail(p, LowerVariant::kAlt).value;
}

namespace {

struct Key {
  std::uint64_t value;
  std::uint32_t index;
  bool operator>(const Key& o) const {
    return value != o.value ? value > o.value : index > o.index;
  }
};

// One trial: returns |top_S(shared + x) ∩ top_S(shared + y)| > T.
bool run_trial(const BoundParams& p, std::uint64_t seed) {
  thread_local std::vector<Key> shared, side;
  thread_local std::vector<char> in_x;
  std::mt19937_64 rng(seed);
  const std::size_t a = p.n - p.d;

  shared.resize(a);
  for (std::size_t i = 0; i < a; ++i) {
    shared[i] = Key{rng(), static_cast<std::uint32_t>(i)};
  }
  auto top_s = [&](std::uint32_t unique_base) {
    side.assign(shared.begin(), shared.end());
    for (std::size_t i = 0; i < p.d; ++i) {
      side.push_back(Key{rng(), static_cast<std::uint32_t>(unique_base + i)});
    }
    std::nth_element(side.begin(), side.begin() + static_cast<std::ptrdiff_t>(p.s - 1),
                     side.end(), std::greater<>{});
    side.resize(p.s);
  };

  top_s(static_cast<std::uint32_t>(a));
  in_x.assign(a, 0);
  for (const Key& k : side) {
    if (k.index < a) in_x[k.index] = 1;
  }
  top_s(static_cast<std::uint32_t>(a + p.d));
  std::size_t overlap = 0;
  for (const Key& k : side) {
    if (k.index < a && in_x[k.index]) ++overlap;
  }
  return overlap > p.t;
}

}  // namespace

MonteCarloEstimate monte_carlo_q(const BoundParams& p, std::size_t trials,
                                 std::uint64_t seed, unsigned threads) {
  p.validate();
  if (trials < 1000) {
    throw Error(ErrorCode::kDomainError, "Monte-Carlo needs at least 1000 trials");
  }
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, trials));

  std::vector<std::size_t> flagged(threads, 0);
  auto worker = [&](unsigned w) {
    for (std::size_t i = w; i < trials; i += threads) {
      if (run_trial(p, derive_seed(seed, i))) ++flagged[w];
    }
  };
  if (threads == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w) pool.emplace_back(worker, w);
    for (auto& th : pool) th.join();
  }

  MonteCarloEstimate out;
  out.trials = trials;
  for (auto f : flagged) out.flagged += f;
  out.estimate = static_cast<double>(out.flagged) / static_cast<double>(trials);
  out.stderr_ = std::sqrt(out.estimate * (1.0 - out.estimate) /
                          static_cast<double>(trials));
  return out;
}

FprDetection fpr_and_detection(const DeltaModel& model, const BoundParams& base) {
  if (model.delta_benign <= model.delta_attack) {
    throw Error(ErrorCode::kDomainError, "delta_benign must exceed delta_attack");
  }
  auto at = [&](std::size_t d) {
    BoundParams b = base;
    b.d = d;
    return Bounds{q_lower(b), q_upper(b)};
  };
  return FprDetection{at(model.delta_benign), at(model.delta_attack)};
}

}  // namespace qfp::theory
