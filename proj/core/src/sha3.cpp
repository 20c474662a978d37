#include "qfp/sha3.hpp"

#include <openssl/evp.h>
#include <openssl/rand.h>

#include "qfp/error.hpp"

namespace qfp {

struct Sha3Hasher::Impl {
  EVP_MD_CTX* ctx = nullptr;
  const EVP_MD* md = nullptr;

  Impl() : ctx(EVP_MD_CTX_new()), md(EVP_sha3_256()) {
    if (ctx == nullptr || md == nullptr) {
      throw std::runtime_error("OpenSSL SHA3-256 unavailable");
    }
  }
  ~Impl() { EVP_MD_CTX_free(ctx); }
};

Sha3Hasher::Sha3Hasher() : impl_(std::make_unique<Impl>()) {}
Sha3Hasher::~Sha3Hasher() = default;
Sha3Hasher::Sha3Hasher(Sha3Hasher&&) noexcept = default;
Sha3Hasher& Sha3Hasher::operator=(Sha3Hasher&&) noexcept = default;

HashDigest Sha3Hasher::digest(std::span<const std::uint8_t> salt,
                              std::span<const std::uint8_t> message) {
  HashDigest out;
  unsigned int len = 0;
  if (EVP_DigestInit_ex(impl_->ctx, impl_->md, nullptr) != 1 ||
      EVP_DigestUpdate(impl_->ctx, salt.data(), salt.size()) != 1 ||
      EVP_DigestUpdate(impl_->ctx, message.data(), message.size()) != 1 ||
      EVP_DigestFinal_ex(impl_->ctx, out.bytes.data(), &len) != 1 ||
      len != kDigestBytes) {
    throw std::runtime_error("SHA3-256 digest failed");
  }
  return out;
}

Salt random_salt() {
  Salt salt;
  if (RAND_bytes(salt.data(), static_cast<int>(salt.size())) != 1) {
    throw std::runtime_error("RAND_bytes failed");
  }
  return salt;
}

}  // namespace qfp
