#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace qfp {

inline constexpr std::size_t kDigestBytes = 32;
inline constexpr std::size_t kSaltBytes = 16;

using Salt = std::array<std::uint8_t, kSaltBytes>;

/// A 256-bit one-way hash output. Ordering is the numeric order of the bytes
/// read as an unsigned big-endian integer, which is exactly lexicographic
/// byte order.
struct HashDigest {
  std::array<std::uint8_t, kDigestBytes> bytes{};

  friend auto operator<=>(const HashDigest&, const HashDigest&) = default;
  friend bool operator==(const HashDigest&, const HashDigest&) = default;

  /// Digest whose big-endian value is `value` (test and tooling helper).
  static HashDigest from_u64(std::uint64_t value);

  /// 64-bit mix of all 256 bits, suitable for bucketing.
  std::uint64_t mix() const noexcept;
};

struct DigestHasher {
  std::size_t operator()(const HashDigest& d) const noexcept { return d.mix(); }
};

/// An 8-bit image with channels interleaved per pixel, rows concatenated.
struct QueryImage {
  std::uint16_t height = 0;
  std::uint16_t width = 0;
  std::uint8_t channels = 0;
  std::vector<std::uint8_t> pixels;

  QueryImage() = default;
  QueryImage(std::uint16_t h, std::uint16_t w, std::uint8_t c);
  QueryImage(std::uint16_t h, std::uint16_t w, std::uint8_t c,
             std::vector<std::uint8_t> data);

  /// Total number of pixel elements, |x| = h * w * c.
  std::size_t size() const noexcept {
    return std::size_t{height} * width * channels;
  }

  /// Throws kMalformedData if the pixel buffer does not match the shape or
  /// the channel count is not 1 or 3.
  void validate() const;

  friend bool operator==(const QueryImage&, const QueryImage&) = default;
};

struct Dims {
  std::uint16_t height = 32;
  std::uint16_t width = 32;
  std::uint8_t channels = 3;

  std::size_t size() const noexcept {
    return std::size_t{height} * width * channels;
  }
  friend bool operator==(const Dims&, const Dims&) = default;
};

/// Parses "HxWxC" (e.g. "32x32x3").
Dims parse_dims(std::string_view text);
std::string format_dims(const Dims& dims);

std::string to_hex(std::span<const std::uint8_t> bytes);
/// Throws kInvalidConfig on odd length or non-hex characters.
std::vector<std::uint8_t> from_hex(std::string_view hex);
Salt salt_from_hex(std::string_view hex);

/// Independent child seed for item `index` of a seeded run (splitmix64
/// finalizer over both inputs).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace qfp
