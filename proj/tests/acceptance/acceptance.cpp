// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "bench_harness.hpp"
#include "oracles.hpp"
#include "qfp/detector.hpp"
#include "qfp/fingerprint.hpp"
#include "qfp/image_io.hpp"
#include "qfp/match_store.hpp"
#include "qfp/simulator.hpp"
#include "qfp/theory.hpp"

namespace {

using namespace qfp;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[failed: " << what << "] ";
    }
  }
};

int failures = 0;

void criterion(const char* id, const char* title, const std::function<void(Outcome&)>& body) {
  Outcome o;
  const auto start = std::chrono::steady_clock::now();
  try {
    body(o);
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail << "[exception: " << e.what() << "] ";
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!o.pass) ++failures;
  char timing[32];
  std::snprintf(timing, sizeof timing, "%.1fs", secs);
  std::cout << id << " " << (o.pass ? "PASS" : "FAIL") << "  " << title << "  "
            << o.detail.str() << "(" << timing << ")" << std::endl;
}

theory::BoundParams params(std::size_t n, std::size_t d, std::size_t s, std::size_t t) {
  theory::BoundParams p;
  p.n = n;
  p.d = d;
  p.s = s;
  p.t = t;
  return p;
}

// Sample stderr, or the binomial spread at the bound under test when the
// sample is all zeros or all ones and its stderr collapses to 0.
double sigma_at(const theory::MonteCarloEstimate& mc, double bound) {
  const double b = std::clamp(bound, 0.0, 1.0);
  return std::max(mc.stderr_, std::sqrt(b * (1 - b) / static_cast<double>(mc.trials)));
}

bool rel_close(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max(1.0, std::abs(b));
}

sim::ExperimentSpec probe_detection_spec() {
  sim::ExperimentSpec spec;
  spec.benign_count = 2000;
  spec.benign_seed = 1;
  for (std::uint64_t i = 0; i < 20; ++i) {
    sim::TraceSpec t;
    t.kind = sim::TraceKind::kProbePair;
    t.length = 200;
    t.budget = 12.0;
    t.seed = 1000 + i;
    spec.traces.push_back(t);
  }
  return spec;
}

// Query i repeats query i-1 when u_i < c; the draws u_i are shared across c.
std::vector<QueryRecord> mixture_trace(std::size_t length, double c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto fresh = sim::gen_benign(length, Dims{}, seed);
  std::vector<QueryRecord> out;
  for (std::size_t i = 0; i < length; ++i) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    out.push_back(i > 0 && u < c ? out.back() : fresh[i]);
  }
  return out;
}

}  // namespace

int main() {
  std::cout.setf(std::ios::fmtflags(0), std::ios::floatfield);

  criterion("AC1", "window count N for |x|=3072, w=20, p=1", [](Outcome& o) {
    const std::size_t n = window_count(3072, 20, 1);
    const auto hashes = Fingerprinter(DetectorConfig{}).hashes(sim::smoothed_noise(Dims{}, 1));
    o.detail << "N=" << n << " hashed=" << hashes.size() << " expected=3053 ";
    o.check(n == 3053 && hashes.size() == 3053, "N != 3053");
  });

  criterion("AC2", "upper bound equals subset enumeration (N=12,S=5,T=2)", [](Outcome& o) {
    double worst = 0.0;
    for (unsigned d = 0; d <= 12; ++d) {
      const double got = theory::q_upper(params(12, d, 5, 2));
      const double want = oracle::enumerate_q_upper(12, d, 5, 2);
      worst = std::max(worst, std::abs(got - want) / std::max(want, 1e-300));
      o.check(rel_close(got, want, 1e-12), "D=" + std::to_string(d));
    }
    o.check(theory::q_upper(params(12, 0, 5, 2)) == 1.0, "D=0 not exactly 1");
    for (unsigned d = 10; d <= 12; ++d) {
      o.check(theory::q_upper(params(12, d, 5, 2)) == 0.0, "D>=N-T not exactly 0");
    }
    o.detail << "max_rel_err=" << worst << " (tol 1e-12) ";
  });

  criterion("AC3", "Monte-Carlo sandwich and tightness of the upper bound", [](Outcome& o) {
    const std::size_t trials = 20000;
    bool verbatim_ok = true, alt_ok = true, upper_ok = true;
    for (std::size_t d = 0; d <= 200; d += 20) {
      const auto p = params(200, d, 20, 10);
      const auto mc = theory::monte_carlo_q(p, trials, 100 + d);
      const double lo = theory::q_lower(p), alt = theory::q_lower_alt(p);
      const double up = theory::q_upper(p);
      verbatim_ok &= mc.estimate >= lo - 3 * sigma_at(mc, lo);
      alt_ok &= mc.estimate >= alt - 3 * sigma_at(mc, alt);
      upper_ok &= mc.estimate <= up + 3 * sigma_at(mc, up);
    }
    o.detail << "N=200 sweep: lower(verbatim) " << (verbatim_ok ? "holds" : "VIOLATED")
             << ", lower(alt) " << (alt_ok ? "holds" : "VIOLATED") << ", upper "
             << (upper_ok ? "holds" : "VIOLATED") << "; ";
    o.check(upper_ok, "upper sandwich");
    o.check(verbatim_ok || alt_ok, "neither lower-bound variant holds");

    double worst_z = 0.0;
    for (std::size_t d : {0u, 50u, 100u, 200u, 500u}) {
      const auto p = params(3053, d, 50, 25);
      const auto mc = theory::monte_carlo_q(p, trials, 200 + d);
      const double qu = theory::q_upper(p);
      const double sigma = sigma_at(mc, qu);
      const double gap = std::abs(mc.estimate - qu);
      if (gap > 0) worst_z = std::max(worst_z, sigma > 0 ? gap / sigma : INFINITY);
      o.check(gap <= 5 * sigma, "N=3053 D=" + std::to_string(d));
    }
    o.detail << "N=3053 max |MC-Q+|/sigma=" << worst_z << " (tol 5) ";
  });

  criterion("AC4", "index max-overlap equals brute force on a 1000-query stream", [](Outcome& o) {
    sim::ExperimentSpec spec;
    spec.benign_count = 600;
    spec.benign_seed = 44;
    for (std::uint64_t i = 0; i < 4; ++i) {
      sim::TraceSpec t;
      t.kind = static_cast<sim::TraceKind>(i % 3);
      t.length = 100;
      t.seed = 400 + i;
      spec.traces.push_back(t);
    }
    const auto stream = sim::build_stream(spec);
    Fingerprinter f(DetectorConfig{});
    FingerprintIndex store(25);
    std::vector<Fingerprint> prior;
    std::size_t mismatches = 0, flagged = 0;
    for (const auto& rec : stream) {
      const auto fp = f(rec.image);
      const auto [best, idx] = oracle::max_overlap(prior, fp);
      const auto r = store.check_and_insert(fp);
      const bool same = r.max_overlap == best &&
                        (idx < 0 ? !r.best_match : r.best_match == static_cast<QueryId>(idx));
      mismatches += !same;
      flagged += r.flagged;
      prior.push_back(fp);
    }
    o.detail << "queries=" << stream.size() << " mismatches=" << mismatches
             << " flagged=" << flagged << " ";
    o.check(stream.size() == 1000, "stream size");
    o.check(mismatches == 0, "mismatch");
  });

  sim::ExperimentResult probe_run;
  criterion("AC5", "detection analog: 20 probe traces + 2000 benign", [&](Outcome& o) {
    probe_run = sim::run_experiment_detailed(probe_detection_spec());
    const auto& r = probe_run.report;
    o.detail << "detection_rate=" << r.attack_detection_rate.value_or(-1)
             << " mean_coverage=" << r.mean_coverage.value_or(-1)
             << " mean_queries_to_detect=" << r.mean_queries_to_detect.value_or(-1)
             << " fpr=" << r.false_positive_rate.value_or(-1) << " ";
    o.check(r.attack_detection_rate == 1.0, "detection rate");
    o.check(r.mean_coverage.value_or(0) >= 0.90, "coverage");
    o.check(r.mean_queries_to_detect.value_or(1e9) <= 10, "queries to detect");
    o.check(r.false_positive_rate == 0.0, "fpr");
  });

  criterion("AC6", "reject mitigation accounting on the same run", [&](Outcome& o) {
    const auto& r = probe_run.report;
    o.check(r.traces.size() == 20, "trace count");
    std::size_t full = 0;
    for (const auto& t : r.traces) {
      const double expected = static_cast<double>(t.length) * (1.0 - t.coverage);
      o.check(std::abs(static_cast<double>(t.forwarded) - expected) < 1e-9,
              "trace " + std::to_string(t.trace_id));
      full += t.forwarded >= t.length;
    }
    o.detail << "traces_fully_forwarded=" << full
             << " attack_success=" << r.attack_success_with_mitigation.value_or(-1) << " ";
    o.check(full == 0 && r.attack_success_with_mitigation == 0.0, "a trace got through");
  });

  criterion("AC7", "check-and-insert latency flat from 1e3 to 1e5 stored", [](Outcome& o) {
    DetectorConfig cfg;
    const auto queries = tools::bench_queries(Dims{}, 1000, cfg, 77);
    const auto small = tools::bench_check_and_insert(queries, 1000, cfg, 1);
    const auto large = tools::bench_check_and_insert(queries, 100000, cfg, 2);
    const double ratio = large.aggregate.mean_us / small.aggregate.mean_us;
    o.detail << "mean_us(1e3)=" << small.aggregate.mean_us
             << " mean_us(1e5)=" << large.aggregate.mean_us << " ratio=" << ratio
             << " (tol 3) ";
    o.check(ratio <= 3.0, "ratio");
    o.check(large.aggregate.mean_us <= 10000.0, "absolute latency");
  });

  criterion("AC8", "storage: fingerprint and BLDB sizes", [](Outcome& o) {
    const auto fp = fingerprint(sim::smoothed_noise(Dims{}, 8), DetectorConfig{});
    const std::size_t payload = to_blfp(fp).size() - kBlfpHeaderBytes;
    o.check(payload <= 32 * 50, "fingerprint payload");
    std::mt19937_64 rng(5);
    FingerprintIndex store(25);
    for (int i = 0; i < 100000; ++i) store.insert(oracle::random_fingerprint(rng, 50));
    std::ostringstream out;
    store.save(out);
    const std::size_t bldb = out.str().size();
    const std::size_t bound = 100000u * (32u * 50u + 16u);
    o.detail << "fingerprint_payload=" << payload << "B (bound 1600) bldb=" << bldb
             << "B (bound " << bound << ") ";
    o.check(bldb <= bound, "BLDB size");
  });

  criterion("AC9", "monotonicity, quantization absorption and locality", [](Outcome& o) {
    std::size_t violations = 0;
    for (std::size_t n : {50u, 200u, 3053u}) {
      for (std::size_t s : {10u, 50u}) {
        for (std::size_t t : {s / 4, s / 2}) {
          double prev = 2.0;
          for (std::size_t d = 0; d <= n; ++d) {
            const double q = theory::q_upper(params(n, d, s, t));
            violations += q > prev + 1e-12;
            prev = q;
          }
        }
        for (std::size_t d = 0; d <= n; d += std::max<std::size_t>(1, n / 50)) {
          double prev = 2.0;
          for (std::size_t t = 0; t < s; ++t) {
            const double q = theory::q_upper(params(n, d, s, t));
            violations += q > prev + 1e-12;
            prev = q;
          }
        }
      }
    }
    o.detail << "bound_violations=" << violations << " ";
    o.check(violations == 0, "q_upper monotonicity");

    DetectorConfig cfg;
    std::size_t prev_cycles = 0;
    bool monotone = true;
    o.detail << "cycles(c)=";
    for (double c : {0.0, 0.25, 0.5, 0.75, 1.0}) {
      const auto cycles = sim::pause_resume_cycles(mixture_trace(40, c, 9), cfg, 1000, 3);
      o.detail << cycles << (c < 1.0 ? "," : " ");
      monotone &= cycles >= prev_cycles;
      prev_cycles = cycles;
    }
    o.check(monotone, "pause-resume monotonicity");

    std::mt19937_64 rng(123);
    Fingerprinter f(cfg);
    std::size_t absorb_fail = 0, locality_fail = 0;
    for (int c = 0; c < 100; ++c) {
      const auto img = sim::smoothed_noise(Dims{}, 9000 + c);
      const auto base_fp = f(img);
      const auto base_h = f.hashes(img);
      QueryImage same = img;
      for (auto& v : same.pixels) {
        if (rng() % 4 == 0) {
          const int lo = v / 50 * 50;
          v = static_cast<std::uint8_t>(std::min(255, lo + static_cast<int>(rng() % 50)));
        }
      }
      absorb_fail += f(same) != base_fp;

      QueryImage edited = img;
      const std::size_t k = 1 + rng() % 8;
      for (std::size_t i = 0; i < k; ++i) {
        auto& v = edited.pixels[rng() % edited.pixels.size()];
        v = static_cast<std::uint8_t>(v >= 128 ? v - 50 - rng() % 70 : v + 50 + rng() % 70);
      }
      const auto h = f.hashes(edited);
      std::size_t changed = 0;
      for (std::size_t w = 0; w < h.size(); ++w) changed += h[w] != base_h[w];
      locality_fail += changed > k * ((cfg.window + cfg.stride - 1) / cfg.stride);
    }
    o.detail << "absorption_failures=" << absorb_fail << " locality_failures=" << locality_fail
             << " ";
    o.check(absorb_fail == 0 && locality_fail == 0, "image cases");
  });

  criterion("AC10", "guided evasion: K=0 exhausts the budget before K=T", [](Outcome& o) {
    DetectorConfig cfg;
    const auto strict = sim::guided_evasion_cost(cfg, Dims{}, 0, 0.05, 1);
    const auto loose = sim::guided_evasion_cost(cfg, Dims{}, cfg.threshold, 0.05, 1);
    o.check(strict.exhausted_at.has_value() && loose.exhausted_at.has_value(), "not finite");
    o.detail << "K=0 -> " << strict.exhausted_at.value_or(0) << " queries, K=" << cfg.threshold
             << " -> " << loose.exhausted_at.value_or(0) << " queries ";
    o.check(strict.exhausted_at.value_or(0) < loose.exhausted_at.value_or(0), "ordering");
  });

  criterion("AC11", "determinism and byte-identical round trips", [](Outcome& o) {
    sim::ExperimentSpec spec;
    spec.benign_count = 50;
    for (std::uint64_t i = 0; i < 3; ++i) {
      sim::TraceSpec t;
      t.kind = static_cast<sim::TraceKind>(i);
      t.length = 30;
      t.seed = 90 + i;
      spec.traces.push_back(t);
    }
    const auto a = sim::run_experiment_detailed(spec);
    const auto b = sim::run_experiment_detailed(spec);
    const auto blqs = to_blqs(a.stream);
    o.check(blqs == to_blqs(b.stream), "BLQS determinism");
    o.check(to_blqs(from_blqs(blqs)) == blqs, "BLQS round trip");
    o.check(report_to_json(a.report) == report_to_json(b.report), "report determinism");
    o.check(report_to_json(report_from_json(report_to_json(a.report))) ==
                report_to_json(a.report),
            "report round trip");

    DetectorConfig cfg;
    cfg.salt = seeded_salt_source(4)();
    const auto fp1 = to_blfp(fingerprint(a.stream[0].image, cfg));
    const auto fp2 = to_blfp(fingerprint(b.stream[0].image, cfg));
    o.check(fp1 == fp2, "BLFP determinism");
    o.check(to_blfp(from_blfp(fp1)) == fp1, "BLFP round trip");

    auto build = [&] {
      FingerprintIndex store(25, cfg.salt);
      Fingerprinter f(cfg);
      for (const auto& r : a.stream) store.check_and_insert(f(r.image));
      std::ostringstream out;
      store.save(out);
      return out.str();
    };
    const auto db = build();
    o.check(db == build(), "BLDB determinism");
    std::istringstream in(db);
    std::ostringstream again;
    FingerprintIndex::load(in, 25).save(again);
    o.check(again.str() == db, "BLDB round trip");
    o.detail << "blqs=" << blqs.size() << "B bldb=" << db.size() << "B ";
  });

  std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " FAILED") << std::endl;
  return failures == 0 ? 0 : 1;
}
