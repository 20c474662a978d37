#include "qfp/detector.hpp"

#include <algorithm>
#include <charconv>
#include <memory>
#include <ostream>
#include <random>

#include <nlohmann/json.hpp>

#include "qfp/error.hpp"

namespace qfp {

std::string QueryLabel::to_string() const {
  if (!attack) return "benign";
  return "attack:" + std::to_string(attack->trace_id) + ":" +
         std::to_string(attack->step);
}

std::string_view to_string(Action a) {
  switch (a) {
    case Action::kForwarded: return "forwarded";
    case Action::kRejected: return "rejected";
    case Action::kError: return "error";
  }
  return "unknown";
}

SaltSource seeded_salt_source(std::uint64_t seed) {
  auto counter = std::make_shared<std::uint64_t>(0);
  return [seed, counter]() {
    std::mt19937_64 rng(derive_seed(seed, (*counter)++));
    Salt salt;
    for (std::size_t i = 0; i < salt.size(); i += 8) {
      const std::uint64_t word = rng();
      for (std::size_t j = 0; j < 8; ++j) {
        salt[i + j] = static_cast<std::uint8_t>(word >> (8 * j));
      }
    }
    return salt;
  };
}

SaltSource random_salt_source() {
  return [] { return random_salt(); };
}

Detector::Detector(DetectorConfig cfg, bool mitigation, SaltSource salts)
    : cfg_(std::move(cfg)),
      mitigation_(mitigation),
      salts_(std::move(salts)),
      fingerprinter_(cfg_),
      store_(cfg_.threshold, cfg_.salt, cfg_.max_fingerprints) {}

void Detector::reset() {
  const Salt salt = salts_();
  store_.reset(salt);
  fingerprinter_.set_salt(salt);
  since_reset_ = 0;
}

Verdict Detector::process(const QueryRecord& record) {
  if (cfg_.reset_interval && since_reset_ >= *cfg_.reset_interval) reset();

  Verdict v;
  v.timestamp = record.timestamp;
  v.label = record.label;
  v.epoch = store_.epoch();
  try {
    const Fingerprint fp = fingerprinter_(record.image);
    const MatchResult r = store_.check_and_maybe_insert(fp, cfg_.insert_flagged);
    v.flagged = r.flagged;
    v.overlap = r.max_overlap;
    v.action = (r.flagged && mitigation_) ? Action::kRejected : Action::kForwarded;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kInputTooSmall &&
        e.code() != ErrorCode::kMalformedData) {
      throw;
    }
    v.action = Action::kError;
    v.error = e.what();
  }
  ++processed_;
  ++since_reset_;
  return v;
}

std::vector<Verdict> Detector::process_stream(std::span<const QueryRecord> stream) {
  std::vector<Verdict> out;
  out.reserve(stream.size());
  for (const auto& record : stream) out.push_back(process(record));
  return out;
}

DetectionReport compute_metrics(
    std::span<const Verdict> verdicts, std::span<const QueryLabel> labels,
    const std::map<std::uint32_t, std::size_t>& required_progress) {
  if (verdicts.size() != labels.size()) {
    throw Error(ErrorCode::kMissingLabels,
                std::to_string(verdicts.size()) + " verdicts but " +
                    std::to_string(labels.size()) + " labels");
  }
  DetectionReport report;
  // trace id -> (step, verdict index)
  std::map<std::uint32_t, std::vector<std::pair<std::uint32_t, std::size_t>>> traces;
  for (std::size_t i = 0; i < verdicts.size(); ++i) {
    if (const auto& a = labels[i].attack) {
      traces[a->trace_id].emplace_back(a->step, i);
    } else {
      ++report.benign_count;
      if (verdicts[i].flagged) ++report.benign_flagged;
    }
  }

  std::size_t detected = 0;
  std::size_t succeeded = 0;
  double qtd_sum = 0.0;
  double coverage_sum = 0.0;
  for (auto& [id, steps] : traces) {
    std::sort(steps.begin(), steps.end());
    TraceMetrics m;
    m.trace_id = id;
    m.length = steps.size();
    for (std::size_t k = 0; k < steps.size(); ++k) {
      const Verdict& v = verdicts[steps[k].second];
      if (v.flagged) {
        ++m.flagged;
        if (m.queries_to_detect == 0) m.queries_to_detect = k + 1;
      }
      if (v.action == Action::kForwarded) ++m.forwarded;
    }
    m.detected = m.flagged > 0;
    m.coverage = static_cast<double>(m.flagged) / static_cast<double>(m.length);
    auto it = required_progress.find(id);
    m.required_progress = it != required_progress.end() ? it->second : m.length;
    if (m.detected) {
      ++detected;
      qtd_sum += static_cast<double>(m.queries_to_detect);
    }
    if (m.forwarded >= m.required_progress) ++succeeded;
    coverage_sum += m.coverage;
    report.traces.push_back(m);
  }

  const auto n = static_cast<double>(report.traces.size());
  if (!report.traces.empty()) {
    report.attack_detection_rate = static_cast<double>(detected) / n;
    report.mean_coverage = coverage_sum / n;
    report.attack_success_with_mitigation = static_cast<double>(succeeded) / n;
  }
  if (detected > 0) report.mean_queries_to_detect = qtd_sum / static_cast<double>(detected);
  if (report.benign_count > 0) {
    report.false_positive_rate = static_cast<double>(report.benign_flagged) /
                                 static_cast<double>(report.benign_count);
  }
  return report;
}

DetectionReport compute_metrics(
    std::span<const Verdict> verdicts,
    const std::map<std::uint32_t, std::size_t>& required_progress) {
  std::vector<QueryLabel> labels;
  labels.reserve(verdicts.size());
  for (const auto& v : verdicts) labels.push_back(v.label);
  return compute_metrics(verdicts, labels, required_progress);
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

namespace {

std::string opt(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string();
}

nlohmann::json opt_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::optional<double> opt_from(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

}  // namespace

void write_verdict_csv(std::ostream& out, std::span<const Verdict> verdicts) {
  out << "timestamp,label,flagged,overlap,action,epoch\n";
  for (const auto& v : verdicts) {
    out << v.timestamp << ',' << v.label.to_string() << ','
        << (v.flagged ? 1 : 0) << ',' << v.overlap << ',' << to_string(v.action)
        << ',' << v.epoch << '\n';
  }
}

void write_report_csv(std::ostream& out, const DetectionReport& report) {
  out << "trace_id,detected,queries_to_detect,coverage\n";
  for (const auto& t : report.traces) {
    out << t.trace_id << ',' << (t.detected ? 1 : 0) << ','
        << t.queries_to_detect << ',' << format_double(t.coverage) << '\n';
  }
  out << "summary," << opt(report.attack_detection_rate) << ','
      << opt(report.mean_queries_to_detect) << ',' << opt(report.mean_coverage)
      << '\n';
}

std::string report_to_json(const DetectionReport& report) {
  nlohmann::json j;
  j["traces"] = nlohmann::json::array();
  for (const auto& t : report.traces) {
    j["traces"].push_back({{"trace_id", t.trace_id},
                           {"length", t.length},
                           {"attack_detected", t.detected},
                           {"queries_to_detect", t.queries_to_detect},
                           {"coverage", t.coverage},
                           {"flagged", t.flagged},
                           {"forwarded", t.forwarded},
                           {"required_progress", t.required_progress}});
  }
  j["benign_count"] = report.benign_count;
  j["benign_flagged"] = report.benign_flagged;
  j["attack_detection_rate"] = opt_json(report.attack_detection_rate);
  j["mean_queries_to_detect"] = opt_json(report.mean_queries_to_detect);
  j["mean_coverage"] = opt_json(report.mean_coverage);
  j["false_positive_rate"] = opt_json(report.false_positive_rate);
  j["attack_success_with_mitigation"] =
      opt_json(report.attack_success_with_mitigation);
  return j.dump(2) + "\n";
}

DetectionReport report_from_json(std::string_view text) {
  DetectionReport report;
  try {
    const auto j = nlohmann::json::parse(text);
    for (const auto& t : j.at("traces")) {
      TraceMetrics m;
      m.trace_id = t.at("trace_id").get<std::uint32_t>();
      m.length = t.at("length").get<std::size_t>();
      m.detected = t.at("attack_detected").get<bool>();
      m.queries_to_detect = t.at("queries_to_detect").get<std::size_t>();
      m.coverage = t.at("coverage").get<double>();
      m.flagged = t.at("flagged").get<std::size_t>();
      m.forwarded = t.at("forwarded").get<std::size_t>();
      m.required_progress = t.at("required_progress").get<std::size_t>();
      report.traces.push_back(m);
    }
    report.benign_count = j.at("benign_count").get<std::size_t>();
    report.benign_flagged = j.at("benign_flagged").get<std::size_t>();
    report.attack_detection_rate = opt_from(j, "attack_detection_rate");
    report.mean_queries_to_detect = opt_from(j, "mean_queries_to_detect");
    report.mean_coverage = opt_from(j, "mean_coverage");
    report.false_positive_rate = opt_from(j, "false_positive_rate");
    report.attack_success_with_mitigation =
        opt_from(j, "attack_success_with_mitigation");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedData, std::string("report JSON: ") + e.what());
  }
  return report;
}

}  // namespace qfp
