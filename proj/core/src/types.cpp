#include "qfp/types.hpp"

#include <charconv>
#include <cstring>

#include "qfp/error.hpp"

namespace qfp {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInputTooSmall: return "InputTooSmall";
    case ErrorCode::kCapacityExceeded: return "CapacityExceeded";
    case ErrorCode::kDomainError: return "DomainError";
    case ErrorCode::kMissingLabels: return "MissingLabels";
    case ErrorCode::kBudgetInfeasible: return "BudgetInfeasible";
    case ErrorCode::kUnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::kMalformedData: return "MalformedData";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

HashDigest HashDigest::from_u64(std::uint64_t value) {
  HashDigest d;
  for (int i = 0; i < 8; ++i) {
    d.bytes[kDigestBytes - 1 - i] = static_cast<std::uint8_t>(value >> (8 * i));
  }
  return d;
}

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix(splitmix(seed) ^ (index * 0xD1B54A32D192ED03ull));
}

std::uint64_t HashDigest::mix() const noexcept {
  std::uint64_t w[4];
  std::memcpy(w, bytes.data(), sizeof(w));
  return splitmix(w[0] ^ splitmix(w[1] ^ splitmix(w[2] ^ splitmix(w[3]))));
}

QueryImage::QueryImage(std::uint16_t h, std::uint16_t w, std::uint8_t c)
    : height(h), width(w), channels(c), pixels(std::size_t{h} * w * c) {}

QueryImage::QueryImage(std::uint16_t h, std::uint16_t w, std::uint8_t c,
                       std::vector<std::uint8_t> data)
    : height(h), width(w), channels(c), pixels(std::move(data)) {
  validate();
}

void QueryImage::validate() const {
  if (channels != 1 && channels != 3) {
    throw Error(ErrorCode::kMalformedData,
                "image channels must be 1 or 3, got " + std::to_string(channels));
  }
  if (pixels.size() != size()) {
    throw Error(ErrorCode::kMalformedData,
                "pixel buffer holds " + std::to_string(pixels.size()) +
                    " values, shape needs " + std::to_string(size()));
  }
}

Dims parse_dims(std::string_view text) {
  unsigned v[3] = {0, 0, 0};
  std::size_t pos = 0;
  for (int i = 0; i < 3; ++i) {
    auto end = text.find('x', pos);
    if (i == 2) end = text.size();
    if (end == std::string_view::npos) break;
    auto part = text.substr(pos, end - pos);
    auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), v[i]);
    if (ec != std::errc{} || ptr != part.data() + part.size() || part.empty()) {
      throw Error(ErrorCode::kInvalidConfig,
                  "dims must look like HxWxC, got '" + std::string(text) + "'");
    }
    pos = end + 1;
  }
  if (v[0] == 0 || v[1] == 0 || v[0] > 65535 || v[1] > 65535 ||
      (v[2] != 1 && v[2] != 3)) {
    throw Error(ErrorCode::kInvalidConfig,
                "dims must look like HxWxC with C in {1,3}, got '" +
                    std::string(text) + "'");
  }
  return Dims{static_cast<std::uint16_t>(v[0]), static_cast<std::uint16_t>(v[1]),
              static_cast<std::uint8_t>(v[2])};
}

std::string format_dims(const Dims& dims) {
  return std::to_string(dims.height) + "x" + std::to_string(dims.width) + "x" +
         std::to_string(dims.channels);
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0xF]);
  }
  return out;
}

std::vector<std::uint8_t> from_hex(std::string_view hex) {
  auto nibble = [&](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw Error(ErrorCode::kInvalidConfig,
                "invalid hex character in '" + std::string(hex) + "'");
  };
  if (hex.size() % 2 != 0) {
    throw Error(ErrorCode::kInvalidConfig, "hex string has odd length");
  }
  std::vector<std::uint8_t> out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<std::uint8_t>(nibble(hex[2 * i]) * 16 +
                                       nibble(hex[2 * i + 1]));
  }
  return out;
}

Salt salt_from_hex(std::string_view hex) {
  auto bytes = from_hex(hex);
  if (bytes.size() != kSaltBytes) {
    throw Error(ErrorCode::kInvalidConfig,
                "salt must be 16 bytes (32 hex digits)");
  }
  Salt salt;
  std::copy(bytes.begin(), bytes.end(), salt.begin());
  return salt;
}

}  // namespace qfp
