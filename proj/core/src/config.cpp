#include "qfp/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "qfp/error.hpp"

namespace qfp {

void DetectorConfig::validate() const {
  auto fail = [](const std::string& msg) {
    throw Error(ErrorCode::kInvalidConfig, msg);
  };
  if (quant_step < 1 || quant_step > 255) fail("q must be in [1, 255]");
  if (window < 1) fail("w must be >= 1");
  if (stride < 1 || stride > window) fail("p must satisfy 1 <= p <= w");
  if (fingerprint_size < 1 || fingerprint_size > 65535) {
    fail("s must be in [1, 65535]");
  }
  if (threshold >= fingerprint_size) fail("t must be < s");
  if (reset_interval && *reset_interval == 0) fail("reset_interval must be >= 1");
  if (max_fingerprints < 1) fail("max_fingerprints must be >= 1");
}

std::optional<Task> parse_task(std::string_view name) {
  if (name == "mnist") return Task::kMnist;
  if (name == "gtsrb") return Task::kGtsrb;
  if (name == "cifar10") return Task::kCifar10;
  if (name == "imagenet") return Task::kImagenet;
  return std::nullopt;
}

DetectorConfig config_for_task(Task task) {
  DetectorConfig cfg;
  if (task == Task::kMnist || task == Task::kImagenet) cfg.window = 50;
  return cfg;
}

Dims dims_for_task(Task task) {
  switch (task) {
    case Task::kMnist: return {28, 28, 1};
    case Task::kGtsrb: return {32, 32, 3};
    case Task::kCifar10: return {32, 32, 3};
    case Task::kImagenet: return {224, 224, 3};
  }
  return {};
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size()) {
    throw Error(ErrorCode::kInvalidConfig,
                "bad value for '" + std::string(key) + "': '" +
                    std::string(value) + "'");
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "on" || v == "true" || v == "1") return true;
  if (v == "off" || v == "false" || v == "0") return false;
  throw Error(ErrorCode::kInvalidConfig,
              "bad boolean for '" + std::string(key) + "': '" + std::string(v) + "'");
}

}  // namespace

KeyValueFile KeyValueFile::parse(std::istream& in) {
  KeyValueFile kv;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto s = trim(line);
    if (s.empty() || s.front() == '#') continue;
    auto eq = s.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::kInvalidConfig,
                  "line " + std::to_string(lineno) + ": expected key=value");
    }
    auto key = trim(s.substr(0, eq));
    if (key.empty()) {
      throw Error(ErrorCode::kInvalidConfig,
                  "line " + std::to_string(lineno) + ": empty key");
    }
    kv.entries_.emplace(std::string(key), std::string(trim(s.substr(eq + 1))));
  }
  return kv;
}

KeyValueFile KeyValueFile::parse(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse(in);
}

std::optional<std::string> KeyValueFile::get(std::string_view key) const {
  auto [lo, hi] = entries_.equal_range(key);
  if (lo == hi) return std::nullopt;
  return std::prev(hi)->second;
}

std::vector<std::string> KeyValueFile::get_all(std::string_view key) const {
  std::vector<std::string> out;
  auto [lo, hi] = entries_.equal_range(key);
  for (auto it = lo; it != hi; ++it) out.push_back(it->second);
  return out;
}

DetectorConfig parse_config(const KeyValueFile& kv, const DetectorConfig& base,
                            bool strict) {
  DetectorConfig cfg = base;
  for (const auto& [key, value] : kv.entries()) {
    if (key == "q") {
      cfg.quant_step = parse_number<int>(key, value);
    } else if (key == "w") {
      cfg.window = parse_number<std::size_t>(key, value);
    } else if (key == "p") {
      cfg.stride = parse_number<std::size_t>(key, value);
    } else if (key == "s") {
      cfg.fingerprint_size = parse_number<std::size_t>(key, value);
    } else if (key == "t") {
      cfg.threshold = parse_number<std::size_t>(key, value);
    } else if (key == "salt_hex") {
      cfg.salt = salt_from_hex(value);
    } else if (key == "reset_interval") {
      if (value.empty() || value == "none") {
        cfg.reset_interval.reset();
      } else {
        cfg.reset_interval = parse_number<std::uint64_t>(key, value);
      }
    } else if (key == "max_fingerprints") {
      cfg.max_fingerprints = parse_number<std::size_t>(key, value);
    } else if (key == "insert_flagged") {
      cfg.insert_flagged = parse_bool(key, value);
    } else if (strict) {
      throw Error(ErrorCode::kInvalidConfig, "unknown config key '" + key + "'");
    }
  }
  cfg.validate();
  return cfg;
}

DetectorConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::kInvalidConfig, "cannot open config '" + path + "'");
  }
  return parse_config(KeyValueFile::parse(in));
}

std::string format_config(const DetectorConfig& cfg) {
  std::ostringstream out;
  out << "q=" << cfg.quant_step << "\n"
      << "w=" << cfg.window << "\n"
      << "p=" << cfg.stride << "\n"
      << "s=" << cfg.fingerprint_size << "\n"
      << "t=" << cfg.threshold << "\n"
      << "salt_hex=" << to_hex(cfg.salt) << "\n";
  if (cfg.reset_interval) out << "reset_interval=" << *cfg.reset_interval << "\n";
  if (cfg.max_fingerprints != DetectorConfig{}.max_fingerprints) {
    out << "max_fingerprints=" << cfg.max_fingerprints << "\n";
  }
  if (!cfg.insert_flagged) out << "insert_flagged=off\n";
  return out.str();
}

}  // namespace qfp
