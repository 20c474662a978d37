#pragma once

#include <cstdint>
#include <memory>
#include <span>

#include "qfp/types.hpp"

namespace qfp {

/// SHA3-256 over (salt || message), reusing one digest context. Not
/// thread-safe; use one instance per thread.
class Sha3Hasher {
 public:
  Sha3Hasher();
  ~Sha3Hasher();
  Sha3Hasher(Sha3Hasher&&) noexcept;
  Sha3Hasher& operator=(Sha3Hasher&&) noexcept;
  Sha3Hasher(const Sha3Hasher&) = delete;
  Sha3Hasher& operator=(const Sha3Hasher&) = delete;

  HashDigest digest(std::span<const std::uint8_t> salt,
                    std::span<const std::uint8_t> message);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Fresh salt from the OpenSSL CSPRNG.
Salt random_salt();

}  // namespace qfp
