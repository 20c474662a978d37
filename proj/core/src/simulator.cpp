#include "qfp/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "qfp/error.hpp"
#include "qfp/fingerprint.hpp"

namespace qfp::sim {

namespace {

double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::uint8_t clamp_pixel(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

int linf(const QueryImage& a, const QueryImage& b) {
  int best = 0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    best = std::max(best, std::abs(int{a.pixels[i]} - int{b.pixels[i]}));
  }
  return best;
}

bool satisfies_min_distance(const std::vector<QueryRecord>& trace, double budget) {
  for (std::size_t i = 1; i < trace.size(); ++i) {
    bool ok = false;
    for (std::size_t j = i; j-- > 0;) {
      if (linf(trace[i].image, trace[j].image) <= budget) {
        ok = true;
        break;
      }
    }
    if (!ok) return false;
  }
  return true;
}

QueryRecord attack_record(QueryImage img, std::uint32_t trace_id, std::size_t step) {
  QueryRecord r;
  r.image = std::move(img);
  r.label = QueryLabel::attack_step(trace_id, static_cast<std::uint32_t>(step));
  r.timestamp = step;
  return r;
}

}  // namespace

std::string_view to_string(TraceKind kind) {
  switch (kind) {
    case TraceKind::kProbePair: return "probe_pair";
    case TraceKind::kInterpolation: return "interpolation";
    case TraceKind::kPatchFlip: return "patch_flip";
  }
  return "unknown";
}

std::optional<TraceKind> parse_trace_kind(std::string_view name) {
  if (name == "probe_pair") return TraceKind::kProbePair;
  if (name == "interpolation") return TraceKind::kInterpolation;
  if (name == "patch_flip") return TraceKind::kPatchFlip;
  return std::nullopt;
}

QueryImage smoothed_noise(const Dims& dims, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::size_t h = dims.height, w = dims.width, c = dims.channels;
  std::vector<std::uint8_t> noise(h * w * c);
  for (auto& v : noise) v = static_cast<std::uint8_t>(rng() >> 56);

  QueryImage img(dims.height, dims.width, dims.channels);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        unsigned sum = 0, count = 0;
        for (std::size_t yy = y > 0 ? y - 1 : 0; yy <= std::min(h - 1, y + 1); ++yy) {
          for (std::size_t xx = x > 0 ? x - 1 : 0; xx <= std::min(w - 1, x + 1); ++xx) {
            sum += noise[(yy * w + xx) * c + ch];
            ++count;
          }
        }
        img.pixels[(y * w + x) * c + ch] =
            static_cast<std::uint8_t>((sum + count / 2) / count);
      }
    }
  }
  return img;
}

std::vector<QueryRecord> gen_benign(std::size_t count, const Dims& dims,
                                    std::uint64_t seed) {
  std::vector<QueryRecord> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    QueryRecord r;
    r.image = smoothed_noise(dims, derive_seed(seed, i));
    r.timestamp = i;
    out.push_back(std::move(r));
  }
  return out;
}

double max_nearest_prior_distance(const std::vector<QueryRecord>& trace) {
  int worst = 0;
  for (std::size_t i = 1; i < trace.size(); ++i) {
    int nearest = 256;
    for (std::size_t j = 0; j < i && nearest > 0; ++j) {
      nearest = std::min(nearest, linf(trace[i].image, trace[j].image));
    }
    worst = std::max(worst, nearest);
  }
  return worst;
}

std::vector<QueryRecord> gen_attack_trace(const TraceSpec& spec,
                                          std::uint32_t trace_id) {
  if (spec.length < 2) {
    throw Error(ErrorCode::kInvalidConfig, "trace length must be >= 2");
  }
  if (!(spec.budget >= 1.0)) {
    throw Error(ErrorCode::kBudgetInfeasible,
                "budget must be at least one intensity unit");
  }
  const QueryImage x0 = smoothed_noise(spec.dims, derive_seed(spec.seed, 0));
  std::mt19937_64 rng(derive_seed(spec.seed, 1));
  const std::size_t n = x0.size();
  std::vector<QueryRecord> out;
  out.reserve(spec.length);

  switch (spec.kind) {
    case TraceKind::kProbePair: {
      // Probes x0 +/- sigma*u stay within sigma of x0, so any two are within
      // 2*sigma <= budget of each other.
      const double sigma = std::min(spec.probe_sigma, spec.budget / 2.0);
      std::normal_distribution<double> gauss;
      std::vector<double> u(n);
      while (out.size() < spec.length) {
        double umax = 0.0;
        for (auto& v : u) {
          v = gauss(rng);
          umax = std::max(umax, std::abs(v));
        }
        for (int sign : {+1, -1}) {
          if (out.size() == spec.length) break;
          QueryImage img = x0;
          for (std::size_t i = 0; i < n; ++i) {
            img.pixels[i] = clamp_pixel(x0.pixels[i] + sign * sigma * u[i] / umax);
          }
          out.push_back(attack_record(std::move(img), trace_id, out.size()));
        }
      }
      break;
    }
    case TraceKind::kInterpolation: {
      // Start point within 2*(budget-1) of x0; bisection steps after the first
      // move alpha by at most 1/4, keeping consecutive queries within budget.
      const double amp = 2.0 * (spec.budget - 1.0);
      std::vector<double> start(n);
      for (std::size_t i = 0; i < n; ++i) {
        start[i] = std::clamp(x0.pixels[i] + amp * (2.0 * unit_uniform(rng) - 1.0),
                              0.0, 255.0);
      }
      double lo = 0.0, hi = 1.0, alpha = 0.5;
      for (std::size_t k = 0; k < spec.length; ++k) {
        QueryImage img = x0;
        for (std::size_t i = 0; i < n; ++i) {
          img.pixels[i] = clamp_pixel((1.0 - alpha) * start[i] + alpha * x0.pixels[i]);
        }
        out.push_back(attack_record(std::move(img), trace_id, k));
        // The first probe is always still adversarial, so the search heads
        // toward x0; later answers are seeded coin flips.
        const bool adversarial = k == 0 || (rng() >> 63) != 0;
        (adversarial ? lo : hi) = alpha;
        alpha = 0.5 * (lo + hi);
      }
      break;
    }
    case TraceKind::kPatchFlip: {
      const int step = static_cast<int>(std::floor(spec.budget));
      const std::size_t ph = std::min<std::size_t>(spec.patch, spec.dims.height);
      const std::size_t pw = std::min<std::size_t>(spec.patch, spec.dims.width);
      const std::size_t w = spec.dims.width, c = spec.dims.channels;
      std::vector<int> delta(n, 0);
      for (std::size_t k = 0; k < spec.length; ++k) {
        const std::size_t r0 = rng() % (spec.dims.height - ph + 1);
        const std::size_t c0 = rng() % (spec.dims.width - pw + 1);
        const int sign = (rng() >> 63) ? 1 : -1;
        for (std::size_t y = r0; y < r0 + ph; ++y) {
          for (std::size_t x = c0; x < c0 + pw; ++x) {
            for (std::size_t ch = 0; ch < c; ++ch) {
              int& d = delta[(y * w + x) * c + ch];
              d = std::clamp(d + sign * step, -step, step);
            }
          }
        }
        QueryImage img = x0;
        for (std::size_t i = 0; i < n; ++i) {
          img.pixels[i] = clamp_pixel(x0.pixels[i] + delta[i]);
        }
        out.push_back(attack_record(std::move(img), trace_id, k));
      }
      break;
    }
  }

  if (!satisfies_min_distance(out, spec.budget)) {
    throw std::logic_error("generated trace violates the min-distance invariant");
  }
  return out;
}

std::vector<QueryRecord> build_stream(const ExperimentSpec& spec) {
  std::vector<QueryRecord> benign = gen_benign(spec.benign_count, spec.dims,
                                               spec.benign_seed);
  std::vector<std::vector<QueryRecord>> traces;
  std::vector<std::uint32_t> tags(benign.size(), 0);
  for (std::size_t i = 0; i < spec.traces.size(); ++i) {
    traces.push_back(gen_attack_trace(spec.traces[i], static_cast<std::uint32_t>(i)));
    tags.insert(tags.end(), traces.back().size(), static_cast<std::uint32_t>(i + 1));
  }
  std::mt19937_64 rng(spec.interleave_seed);
  std::shuffle(tags.begin(), tags.end(), rng);

  std::vector<QueryRecord> stream;
  stream.reserve(tags.size());
  std::size_t next_benign = 0;
  std::vector<std::size_t> next_step(traces.size(), 0);
  for (auto tag : tags) {
    QueryRecord r = tag == 0 ? std::move(benign[next_benign++])
                             : std::move(traces[tag - 1][next_step[tag - 1]++]);
    r.timestamp = stream.size();
    stream.push_back(std::move(r));
  }
  return stream;
}

ExperimentResult run_stream(const ExperimentSpec& spec,
                            std::vector<QueryRecord> stream) {
  SaltSource salts = seeded_salt_source(spec.salt_seed);
  DetectorConfig cfg = spec.detector;
  cfg.salt = salts();
  Detector detector(cfg, spec.mitigation, salts);
  ExperimentResult out;
  out.verdicts = detector.process_stream(stream);
  out.report = compute_metrics(out.verdicts);
  out.stream = std::move(stream);
  return out;
}

ExperimentResult run_experiment_detailed(const ExperimentSpec& spec) {
  return run_stream(spec, build_stream(spec));
}

DetectionReport run_experiment(const ExperimentSpec& spec) {
  return run_experiment_detailed(spec).report;
}

std::size_t pause_resume_cycles(const std::vector<QueryRecord>& trace,
                                const DetectorConfig& cfg,
                                std::uint64_t reset_interval,
                                std::uint64_t salt_seed) {
  if (reset_interval == 0) {
    throw Error(ErrorCode::kInvalidConfig, "reset_interval must be >= 1");
  }
  SaltSource salts = seeded_salt_source(salt_seed);
  std::size_t pos = 0;
  std::size_t cycles = 0;
  while (pos < trace.size()) {
    ++cycles;
    DetectorConfig epoch_cfg = cfg;
    epoch_cfg.salt = salts();
    Fingerprinter fingerprinter(epoch_cfg);
    FingerprintIndex store(cfg.threshold, epoch_cfg.salt, cfg.max_fingerprints);
    std::uint64_t forwarded = 0;
    while (pos < trace.size() && forwarded < reset_interval) {
      const MatchResult r = store.check_and_maybe_insert(
          fingerprinter(trace[pos].image), cfg.insert_flagged);
      if (r.flagged) break;  // rejected: pause until the next reset
      ++pos;
      ++forwarded;
    }
  }
  return cycles;
}

PauseResumeResult pause_resume(const ExperimentSpec& spec,
                               std::uint64_t reset_interval) {
  PauseResumeResult out;
  double total = 0.0;
  for (std::size_t i = 0; i < spec.traces.size(); ++i) {
    const auto trace = gen_attack_trace(spec.traces[i], static_cast<std::uint32_t>(i));
    const std::size_t c = pause_resume_cycles(trace, spec.detector, reset_interval,
                                              derive_seed(spec.salt_seed, i));
    out.cycles.push_back(c);
    total += static_cast<double>(c);
  }
  if (!out.cycles.empty()) out.mean_cycles = total / static_cast<double>(out.cycles.size());
  return out;
}

namespace {

std::size_t sorted_overlap(const std::vector<HashDigest>& a,
                           const std::vector<HashDigest>& b) {
  std::size_t i = 0, j = 0, n = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] == b[j]) {
      ++n, ++i, ++j;
    } else if (a[i] > b[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  return n;
}

}  // namespace

EvasionResult guided_evasion_cost(const DetectorConfig& cfg, const Dims& dims,
                                  std::size_t k, double budget,
                                  std::uint64_t seed, std::size_t max_queries) {
  cfg.validate();
  EvasionResult result;
  if (k >= cfg.fingerprint_size) return result;  // nothing to evade

  const QueryImage x0 = smoothed_noise(dims, seed);
  QueryImage current = x0;
  const std::size_t n = x0.size();
  const std::size_t windows = window_count(n, cfg.window, cfg.stride);
  if (windows == 0) throw Error(ErrorCode::kInputTooSmall, "image smaller than window");
  const int q = cfg.quant_step;

  Fingerprinter fingerprinter(cfg);
  std::vector<std::vector<HashDigest>> prior;
  // Per changed pixel: current multiple of q and the multiples already used.
  std::unordered_map<std::size_t, std::pair<int, std::set<int>>> changed;
  double sumsq = 0.0;
  const double norm = 255.0 * std::sqrt(static_cast<double>(n));

  auto change_pixel = [&](std::size_t pos) {
    auto& [m, used] = changed[pos];
    used.insert(0);
    used.insert(m);
    for (int step = 1; step <= 255 / q + 1; ++step) {
      for (int cand : {step, -step}) {
        const int v = int{x0.pixels[pos]} + cand * q;
        if (v < 0 || v > 255 || used.count(cand)) continue;
        sumsq += double(cand * q) * (cand * q) - double(m * q) * (m * q);
        m = cand;
        used.insert(cand);
        current.pixels[pos] = static_cast<std::uint8_t>(v);
        ++result.pixel_changes;
        return true;
      }
    }
    return false;  // every bucket of this pixel is spent
  };

  for (std::size_t query = 1; query <= max_queries; ++query) {
    std::vector<HashDigest> fp;
    for (std::size_t round = 0;; ++round) {
      const auto hashes = fingerprinter.hashes(current);
      fp = select_fingerprint(hashes, cfg.fingerprint_size).digests;
      std::size_t worst = 0, worst_idx = 0;
      for (std::size_t j = 0; j < prior.size(); ++j) {
        const std::size_t o = sorted_overlap(fp, prior[j]);
        if (o > worst) worst = o, worst_idx = j;
      }
      if (worst <= k) break;
      if (round > 4 * cfg.fingerprint_size) {
        throw std::logic_error("guided evasion made no progress");
      }

      // Windows whose digests are shared with the worst prior fingerprint.
      std::vector<HashDigest> shared;
      std::set_intersection(fp.begin(), fp.end(), prior[worst_idx].begin(),
                            prior[worst_idx].end(), std::back_inserter(shared),
                            std::greater<>{});
      std::unordered_map<std::size_t, std::size_t> digest_of;  // window -> shared idx
      std::vector<std::size_t> windows_left(shared.size(), 0);
      for (std::size_t w = 0; w < hashes.size(); ++w) {
        auto it = std::lower_bound(shared.begin(), shared.end(), hashes[w],
                                   std::greater<>{});
        if (it != shared.end() && *it == hashes[w]) {
          const auto idx = static_cast<std::size_t>(it - shared.begin());
          digest_of[w] = idx;
          ++windows_left[idx];
        }
      }
      std::vector<std::size_t> targets;
      for (const auto& [w, idx] : digest_of) targets.push_back(w);
      std::sort(targets.begin(), targets.end());

      // Leftmost uncovered window first; its last pixel breaks the longest
      // run of following windows. Stop once enough digests are gone.
      std::size_t need = worst - k, destroyed = 0, covered_to = 0;
      bool any = false;
      for (std::size_t w : targets) {
        if (destroyed >= need) break;
        if (any && w <= covered_to) continue;
        const std::size_t pos = w * cfg.stride + cfg.window - 1;
        if (!change_pixel(pos)) continue;
        any = true;
        covered_to = std::min(windows - 1, pos / cfg.stride);
        for (std::size_t v : targets) {
          if (v < w || v > covered_to) continue;
          if (--windows_left[digest_of[v]] == 0) ++destroyed;
        }
      }
      if (!any) throw std::logic_error("guided evasion ran out of pixels");
    }

    prior.push_back(std::move(fp));
    result.queries = query;
    result.final_l2 = std::sqrt(sumsq) / norm;
    if (result.final_l2 > budget) {
      result.exhausted_at = query;
      return result;
    }
  }
  return result;
}

namespace {

std::uint64_t parse_u64(std::string_view key, const std::string& v) {
  try {
    std::size_t used = 0;
    const auto out = std::stoull(v, &used);
    if (used == v.size()) return out;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::kInvalidConfig, "bad value for '" + std::string(key) + "': '" + v + "'");
}

double parse_double(std::string_view key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    if (used == v.size()) return out;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::kInvalidConfig, "bad value for '" + std::string(key) + "': '" + v + "'");
}

TraceKind kind_or_throw(const std::string& v) {
  if (auto k = parse_trace_kind(v)) return *k;
  throw Error(ErrorCode::kInvalidConfig, "unknown trace kind '" + v + "'");
}

}  // namespace

ExperimentSpec parse_experiment(const KeyValueFile& kv) {
  static const std::set<std::string, std::less<>> kExperimentKeys = {
      "benign_count", "dims",        "benign_seed",  "interleave_seed",
      "salt_seed",    "mitigation",  "trace",        "trace_count",
      "trace_kind",   "trace_length", "trace_budget", "trace_seed"};
  static const std::set<std::string, std::less<>> kDetectorKeys = {
      "q", "w", "p", "s", "t", "reset_interval", "max_fingerprints",
      "insert_flagged"};

  for (const auto& [key, value] : kv.entries()) {
    if (!kExperimentKeys.count(key) && !kDetectorKeys.count(key)) {
      throw Error(ErrorCode::kInvalidConfig, "unknown experiment key '" + key + "'");
    }
  }

  ExperimentSpec spec;
  spec.detector = parse_config(kv, DetectorConfig{}, false);
  if (auto v = kv.get("benign_count")) spec.benign_count = parse_u64("benign_count", *v);
  if (auto v = kv.get("dims")) spec.dims = parse_dims(*v);
  if (auto v = kv.get("benign_seed")) spec.benign_seed = parse_u64("benign_seed", *v);
  if (auto v = kv.get("interleave_seed")) {
    spec.interleave_seed = parse_u64("interleave_seed", *v);
  }
  if (auto v = kv.get("salt_seed")) spec.salt_seed = parse_u64("salt_seed", *v);
  if (auto v = kv.get("mitigation")) {
    if (*v != "on" && *v != "off") {
      throw Error(ErrorCode::kInvalidConfig, "mitigation must be on or off");
    }
    spec.mitigation = *v == "on";
  }

  for (const auto& line : kv.get_all("trace")) {
    std::istringstream in(line);
    std::string kind, length, budget, seed, extra;
    if (!(in >> kind >> length >> budget >> seed) || (in >> extra)) {
      throw Error(ErrorCode::kInvalidConfig,
                  "trace must be 'kind length budget seed', got '" + line + "'");
    }
    TraceSpec t;
    t.kind = kind_or_throw(kind);
    t.length = parse_u64("trace", length);
    t.budget = parse_double("trace", budget);
    t.seed = parse_u64("trace", seed);
    t.dims = spec.dims;
    spec.traces.push_back(t);
  }
  if (auto v = kv.get("trace_count")) {
    const auto count = parse_u64("trace_count", *v);
    TraceSpec base;
    base.dims = spec.dims;
    if (auto k = kv.get("trace_kind")) base.kind = kind_or_throw(*k);
    if (auto l = kv.get("trace_length")) base.length = parse_u64("trace_length", *l);
    if (auto b = kv.get("trace_budget")) base.budget = parse_double("trace_budget", *b);
    const std::uint64_t seed0 = kv.get("trace_seed") ? parse_u64("trace_seed", *kv.get("trace_seed")) : 100;
    for (std::uint64_t i = 0; i < count; ++i) {
      TraceSpec t = base;
      t.seed = seed0 + i;
      spec.traces.push_back(t);
    }
  }
  return spec;
}

ExperimentSpec load_experiment(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kInvalidConfig, "cannot open experiment '" + path + "'");
  return parse_experiment(KeyValueFile::parse(in));
}

std::string format_experiment(const ExperimentSpec& spec) {
  std::ostringstream out;
  out << "benign_count=" << spec.benign_count << "\n"
      << "dims=" << format_dims(spec.dims) << "\n"
      << "benign_seed=" << spec.benign_seed << "\n"
      << "interleave_seed=" << spec.interleave_seed << "\n"
      << "salt_seed=" << spec.salt_seed << "\n"
      << "mitigation=" << (spec.mitigation ? "on" : "off") << "\n"
      << "q=" << spec.detector.quant_step << "\n"
      << "w=" << spec.detector.window << "\n"
      << "p=" << spec.detector.stride << "\n"
      << "s=" << spec.detector.fingerprint_size << "\n"
      << "t=" << spec.detector.threshold << "\n";
  if (spec.detector.reset_interval) {
    out << "reset_interval=" << *spec.detector.reset_interval << "\n";
  }
  for (const auto& t : spec.traces) {
    out << "trace=" << to_string(t.kind) << " " << t.length << " "
        << format_double(t.budget) << " " << t.seed << "\n";
  }
  return out.str();
}

}  // namespace qfp::sim
