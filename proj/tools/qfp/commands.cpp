#include "commands.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <vector>

#include "bench_harness.hpp"
#include "qfp/config.hpp"
#include "qfp/detector.hpp"
#include "qfp/error.hpp"
#include "qfp/fingerprint.hpp"
#include "qfp/image_io.hpp"
#include "qfp/sha3.hpp"
#include "qfp/simulator.hpp"
#include "qfp/theory.hpp"

namespace qfp::tools {

namespace {

namespace fs = std::filesystem;

struct Options {
  std::string config;
  std::string salt_hex;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> reset_interval;
  std::string mitigation = "on";
  std::string out;
  unsigned threads = 1;

  // fingerprint / detect
  std::string input;

  // simulate
  std::string spec;
  std::string report;
  std::string scenario = "stream";
  std::vector<std::size_t> ks;
  double budget = 0.05;
  std::string dims;

  // theory
  std::optional<std::size_t> n, s, t;
  std::size_t d_from = 0;
  std::optional<std::size_t> d_to;
  std::size_t d_step = 1;
  std::string defaults_for;
  std::size_t mc = 0;
  std::string lower_variant = "verbatim";

  // bench
  std::string sizes = "1000,10000,100000";
  std::size_t trials = 1000;
};

struct LoadedConfig {
  DetectorConfig cfg;
  bool has_salt = false;
};

LoadedConfig load_detector_config(const Options& o) {
  LoadedConfig lc;
  if (!o.config.empty()) {
    const auto kv = KeyValueFile::parse(read_file(o.config));
    lc.cfg = parse_config(kv);
    lc.has_salt = kv.get("salt_hex").has_value();
  }
  if (!o.salt_hex.empty()) {
    lc.cfg.salt = salt_from_hex(o.salt_hex);
    lc.has_salt = true;
  }
  if (o.reset_interval) lc.cfg.reset_interval = *o.reset_interval;
  lc.cfg.validate();
  return lc;
}

// Writes to --out when given, stdout otherwise.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : out_(&fallback) {
    if (!path.empty()) {
      file_.open(path, std::ios::binary | std::ios::trunc);
      if (!file_) throw Error(ErrorCode::kMalformedData, "cannot write '" + path + "'");
      out_ = &file_;
    }
  }
  std::ostream& get() { return *out_; }

 private:
  std::ofstream file_;
  std::ostream* out_;
};

std::string opt_text(const std::optional<double>& v) {
  return v ? format_double(*v) : "null";
}

void print_summary(std::ostream& out, const DetectionReport& r) {
  out << "traces=" << r.traces.size() << " benign=" << r.benign_count
      << " benign_flagged=" << r.benign_flagged
      << " detection_rate=" << opt_text(r.attack_detection_rate)
      << " mean_coverage=" << opt_text(r.mean_coverage)
      << " mean_queries_to_detect=" << opt_text(r.mean_queries_to_detect)
      << " fpr=" << opt_text(r.false_positive_rate)
      << " attack_success=" << opt_text(r.attack_success_with_mitigation) << "\n";
}

int cmd_fingerprint(const Options& o, std::ostream& out, std::ostream& err) {
  LoadedConfig lc = load_detector_config(o);
  if (!lc.has_salt) {
    lc.cfg.salt = random_salt();
    err << "salt=" << to_hex(lc.cfg.salt) << "\n";
  }
  Fingerprinter fingerprinter(lc.cfg);
  const std::string bytes = read_file(o.input);

  auto emit = [&](const QueryImage& img, const std::string& path) {
    const Fingerprint fp = fingerprinter(img);
    const std::string blfp = to_blfp(fp);
    write_file(path, blfp);
    out << path << " digests=" << fp.size() << " bytes=" << blfp.size()
        << " payload=" << blfp.size() - kBlfpHeaderBytes << "\n";
  };

  if (looks_like_blqs(bytes)) {
    const auto records = from_blqs(bytes);
    const std::string prefix =
        o.out.empty() ? (fs::path(o.input).parent_path() / fs::path(o.input).stem()).string()
                      : o.out;
    for (std::size_t i = 0; i < records.size(); ++i) {
      emit(records[i].image, prefix + "-" + std::to_string(i) + ".blfp");
    }
  } else {
    emit(read_pnm(bytes), o.out.empty() ? o.input + ".blfp" : o.out);
  }
  return kExitOk;
}

int cmd_detect(const Options& o, std::ostream& out, std::ostream& err) {
  if (o.mitigation != "on" && o.mitigation != "off") {
    err << "error: --mitigation must be on or off\n";
    return kExitUsage;
  }
  LoadedConfig lc = load_detector_config(o);
  const auto records = from_blqs(read_file(o.input));

  SaltSource salts = o.seed ? seeded_salt_source(*o.seed) : random_salt_source();
  if (!lc.has_salt) lc.cfg.salt = salts();
  Detector detector(lc.cfg, o.mitigation == "on", salts);
  const auto verdicts = detector.process_stream(records);
  const auto report = compute_metrics(verdicts);

  fs::create_directories(o.out);
  {
    std::ofstream f(fs::path(o.out) / "verdicts.csv", std::ios::binary);
    write_verdict_csv(f, verdicts);
  }
  {
    std::ofstream f(fs::path(o.out) / "report.csv", std::ios::binary);
    write_report_csv(f, report);
  }
  write_file((fs::path(o.out) / "report.json").string(), report_to_json(report));
  print_summary(out, report);
  return kExitOk;
}

int cmd_simulate(const Options& o, std::ostream& out, std::ostream& err) {
  sim::ExperimentSpec spec;
  if (!o.spec.empty()) {
    spec = sim::parse_experiment(KeyValueFile::parse(read_file(o.spec)));
  }
  if (!o.dims.empty()) {
    spec.dims = parse_dims(o.dims);
    for (auto& t : spec.traces) t.dims = spec.dims;
  }
  if (o.mitigation != "on" && o.mitigation != "off") {
    err << "error: --mitigation must be on or off\n";
    return kExitUsage;
  }
  spec.mitigation = o.mitigation == "on";
  if (o.reset_interval && o.scenario == "stream") {
    spec.detector.reset_interval = *o.reset_interval;
  }

  if (o.scenario == "stream") {
    auto result = sim::run_experiment_detailed(spec);
    if (!o.out.empty()) write_file(o.out, to_blqs(result.stream));
    if (!o.report.empty()) write_file(o.report, report_to_json(result.report));
    print_summary(out, result.report);
    return kExitOk;
  }
  if (o.scenario == "pause-resume") {
    if (!o.reset_interval) {
      err << "error: --reset-interval is required for pause-resume\n";
      return kExitUsage;
    }
    const auto r = sim::pause_resume(spec, *o.reset_interval);
    Sink sink(o.out, out);
    sink.get() << "trace_id,cycles\n";
    for (std::size_t i = 0; i < r.cycles.size(); ++i) {
      sink.get() << i << "," << r.cycles[i] << "\n";
    }
    sink.get() << "mean," << format_double(r.mean_cycles) << "\n";
    return kExitOk;
  }
  if (o.scenario == "guided-evasion") {
    std::vector<std::size_t> ks = o.ks;
    if (ks.empty()) ks = {0, spec.detector.threshold};
    Sink sink(o.out, out);
    sink.get() << "k,exhausted_at,queries,pixel_changes,final_l2\n";
    for (std::size_t k : ks) {
      const auto r = sim::guided_evasion_cost(spec.detector, spec.dims, k, o.budget,
                                              o.seed.value_or(1));
      sink.get() << k << "," << (r.exhausted_at ? std::to_string(*r.exhausted_at) : "")
                 << "," << r.queries << "," << r.pixel_changes << ","
                 << format_double(r.final_l2) << "\n";
    }
    return kExitOk;
  }
  err << "error: unknown scenario '" << o.scenario << "'\n";
  return kExitUsage;
}

int cmd_theory(const Options& o, std::ostream& out, std::ostream& err) {
  theory::BoundParams base;
  if (!o.defaults_for.empty()) {
    const auto task = parse_task(o.defaults_for);
    if (!task) {
      err << "error: unknown task '" << o.defaults_for << "'\n";
      return kExitUsage;
    }
    const DetectorConfig cfg = config_for_task(*task);
    base.n = window_count(dims_for_task(*task).size(), cfg.window, cfg.stride);
    base.s = cfg.fingerprint_size;
    base.t = cfg.threshold;
  }
  if (o.n) base.n = *o.n;
  if (o.s) base.s = *o.s;
  if (o.t) base.t = *o.t;
  if (o.d_step == 0) {
    err << "error: --d-step must be >= 1\n";
    return kExitUsage;
  }
  theory::LowerVariant variant;
  if (o.lower_variant == "verbatim") {
    variant = theory::LowerVariant::kVerbatim;
  } else if (o.lower_variant == "alt") {
    variant = theory::LowerVariant::kAlt;
  } else {
    err << "error: --lower-variant must be verbatim or alt\n";
    return kExitUsage;
  }
  const std::size_t d_to = o.d_to.value_or(base.n);
  base.validate();
  if (d_to > base.n || o.d_from > d_to) {
    throw Error(ErrorCode::kDomainError, "D range must satisfy 0 <= d-from <= d-to <= N");
  }

  Sink sink(o.out, out);
  auto& csv = sink.get();
  csv << "N,D,S,T,q_lower,q_upper,mc_estimate,mc_stderr\n";
  for (std::size_t d = o.d_from; d <= d_to; d += o.d_step) {
    theory::BoundParams p = base;
    p.d = d;
    csv << p.n << "," << p.d << "," << p.s << "," << p.t << ","
        << format_double(theory::q_lower_detail(p, variant).value) << ","
        << format_double(theory::q_upper(p)) << ",";
    if (o.mc > 0) {
      const auto mc = theory::monte_carlo_q(p, o.mc, derive_seed(o.seed.value_or(0), d),
                                            o.threads);
      csv << format_double(mc.estimate) << "," << format_double(mc.stderr_);
    } else {
      csv << ",";
    }
    csv << "\n";
  }
  return kExitOk;
}

int cmd_bench(const Options& o, std::ostream& out, std::ostream&) {
  const Dims dims = o.dims.empty() ? Dims{} : parse_dims(o.dims);
  LoadedConfig lc = load_detector_config(o);
  if (!lc.has_salt) lc.cfg.salt = seeded_salt_source(o.seed.value_or(0))();
  std::vector<std::size_t> sizes;
  std::istringstream list(o.sizes);
  for (std::string item; std::getline(list, item, ',');) {
    if (item.empty()) continue;
    std::size_t used = 0;
    std::size_t v = 0;
    try {
      v = std::stoull(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size()) throw Error(ErrorCode::kInvalidConfig, "bad --sizes entry '" + item + "'");
    sizes.push_back(v);
  }
  Sink sink(o.out, out);
  auto& csv = sink.get();
  csv << "n,trials,threads,thread,mean_us,p99_us,bytes_per_fingerprint,store_bytes\n";
  if (sizes.empty()) return kExitOk;

  const auto queries = bench_queries(dims, o.trials, lc.cfg, o.seed.value_or(0));
  for (std::size_t n : sizes) {
    const auto row = bench_check_and_insert(queries, n, lc.cfg,
                                            derive_seed(o.seed.value_or(0), n), o.threads);
    auto line = [&](const std::string& thread, const LatencyStats& st) {
      csv << row.n << "," << row.trials << "," << row.threads << "," << thread << ","
          << format_double(st.mean_us) << "," << format_double(st.p99_us) << ","
          << format_double(row.bytes_per_fingerprint) << "," << row.store_bytes << "\n";
    };
    line("all", row.aggregate);
    for (std::size_t t = 0; t < row.per_thread.size(); ++t) {
      line(std::to_string(t), row.per_thread[t]);
    }
  }
  return kExitOk;
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDomainError:
    case ErrorCode::kInvalidConfig:
    case ErrorCode::kBudgetInfeasible:
      return kExitUsage;
    default:
      return kExitData;
  }
}

}  // namespace

int run(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Query-stream fingerprinting and duplicate detection", "qfp"};
  app.require_subcommand(1, 1);
  Options o;

  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "Detector config (key=value)")->check(CLI::ExistingFile);
    sub->add_option("--salt-hex", o.salt_hex, "16-byte salt as 32 hex digits");
  };

  auto* fp = app.add_subcommand("fingerprint", "Fingerprint a PGM/PPM image or a BLQS stream");
  fp->add_option("input", o.input, "Input file")->required();
  add_config(fp);
  fp->add_option("--out", o.out, "Output BLFP path (image) or prefix (stream)");

  auto* det = app.add_subcommand("detect", "Run the detector over a BLQS stream");
  det->add_option("input", o.input, "BLQS stream")->required();
  add_config(det);
  det->add_option("--seed", o.seed, "Seed for store salts");
  det->add_option("--reset-interval", o.reset_interval, "Reset the store every N queries")
      ->check(CLI::PositiveNumber);
  det->add_option("--mitigation", o.mitigation, "Reject flagged queries (on/off)");
  det->add_option("--out", o.out, "Output directory")->required();

  auto* simc = app.add_subcommand("simulate", "Generate and evaluate synthetic query streams");
  simc->add_option("--spec", o.spec, "Experiment spec (key=value)")->check(CLI::ExistingFile);
  simc->add_option("--scenario", o.scenario, "stream, pause-resume or guided-evasion");
  simc->add_option("--out", o.out, "BLQS stream (stream) or CSV (other scenarios)");
  simc->add_option("--report", o.report, "Report JSON path (stream)");
  simc->add_option("--reset-interval", o.reset_interval, "Store reset interval")
      ->check(CLI::PositiveNumber);
  simc->add_option("--mitigation", o.mitigation, "Reject flagged queries (on/off)");
  simc->add_option("--seed", o.seed, "Source image seed (guided-evasion)");
  simc->add_option("--k", o.ks, "Allowed overlaps (guided-evasion)")->delimiter(',');
  simc->add_option("--budget", o.budget, "Normalized L2 budget (guided-evasion)");
  simc->add_option("--dims", o.dims, "Image dims HxWxC");

  auto* th = app.add_subcommand("theory", "Tabulate flagging-probability bounds");
  th->add_option("--n", o.n, "Full hash set size N");
  th->add_option("--s", o.s, "Fingerprint size S");
  th->add_option("--t", o.t, "Threshold T");
  th->add_option("--d-from", o.d_from, "First D");
  th->add_option("--d-to", o.d_to, "Last D (default N)");
  th->add_option("--d-step", o.d_step, "D increment");
  th->add_option("--defaults-for", o.defaults_for, "mnist, gtsrb, cifar10 or imagenet");
  th->add_option("--mc", o.mc, "Monte-Carlo trials per row (>= 1000)");
  th->add_option("--seed", o.seed, "Monte-Carlo seed");
  th->add_option("--threads", o.threads, "Monte-Carlo threads (0 = all cores)");
  th->add_option("--lower-variant", o.lower_variant, "verbatim or alt");
  th->add_option("--out", o.out, "CSV path (default stdout)");

  auto* be = app.add_subcommand("bench", "Measure check-and-insert latency vs store size");
  add_config(be);
  be->add_option("--dims", o.dims, "Query image dims HxWxC");
  be->add_option("--sizes", o.sizes, "Comma-separated stored fingerprint counts");
  be->add_option("--trials", o.trials, "Timed queries per size");
  be->add_option("--threads", o.threads, "Threads issuing queries")->check(CLI::PositiveNumber);
  be->add_option("--seed", o.seed, "Seed");
  be->add_option("--out", o.out, "CSV path (default stdout)");

  std::vector<const char*> argv{"qfp"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (fp->parsed()) return cmd_fingerprint(o, out, err);
    if (det->parsed()) return cmd_detect(o, out, err);
    if (simc->parsed()) return cmd_simulate(o, out, err);
    if (th->parsed()) return cmd_theory(o, out, err);
    if (be->parsed()) return cmd_bench(o, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace qfp::tools
