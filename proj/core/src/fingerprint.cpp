#include "qfp/fingerprint.hpp"

#include <algorithm>
#include <functional>
#include <ostream>

#include "byte_io.hpp"
#include "qfp/error.hpp"

namespace qfp {

std::vector<std::uint8_t> quantize(const QueryImage& img, int q) {
  if (q < 1) throw Error(ErrorCode::kInvalidConfig, "q must be >= 1");
  std::vector<std::uint8_t> out(img.pixels.size());
  const auto step = static_cast<unsigned>(q);
  std::transform(img.pixels.begin(), img.pixels.end(), out.begin(),
                 [step](std::uint8_t v) {
                   return static_cast<std::uint8_t>(v / step);
                 });
  return out;
}

std::size_t window_count(std::size_t n, std::size_t w, std::size_t p) {
  if (n < w || w == 0 || p == 0) return 0;
  return (n - w) / p + 1;
}

std::vector<HashDigest> window_hashes(std::span<const std::uint8_t> qbytes,
                                      std::size_t w, std::size_t p,
                                      const Salt& salt, Sha3Hasher& hasher) {
  if (w == 0 || p == 0 || p > w) {
    throw Error(ErrorCode::kInvalidConfig, "window requires 1 <= p <= w");
  }
  if (qbytes.size() < w) {
    throw Error(ErrorCode::kInputTooSmall,
                "input has " + std::to_string(qbytes.size()) +
                    " pixel elements, window needs " + std::to_string(w));
  }
  const std::size_t n = window_count(qbytes.size(), w, p);
  std::vector<HashDigest> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    out.push_back(hasher.digest(salt, qbytes.subspan(k * p, w)));
  }
  return out;
}

std::vector<HashDigest> window_hashes(std::span<const std::uint8_t> qbytes,
                                      std::size_t w, std::size_t p,
                                      const Salt& salt) {
  Sha3Hasher hasher;
  return window_hashes(qbytes, w, p, salt, hasher);
}

Fingerprint select_fingerprint(std::span<const HashDigest> hashes,
                               std::size_t s) {
  Fingerprint fp;
  fp.source_n = hashes.size();
  fp.digests.assign(hashes.begin(), hashes.end());
  std::sort(fp.digests.begin(), fp.digests.end(), std::greater<>{});
  fp.digests.erase(std::unique(fp.digests.begin(), fp.digests.end()),
                   fp.digests.end());
  if (fp.digests.size() > s) fp.digests.resize(s);
  return fp;
}

Fingerprint fingerprint(const QueryImage& img, const DetectorConfig& cfg) {
  Fingerprinter f(cfg);
  return f(img);
}

Fingerprinter::Fingerprinter(DetectorConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
}

std::vector<HashDigest> Fingerprinter::hashes(const QueryImage& img) {
  img.validate();
  auto q = quantize(img, cfg_.quant_step);
  return window_hashes(q, cfg_.window, cfg_.stride, cfg_.salt, hasher_);
}

Fingerprint Fingerprinter::operator()(const QueryImage& img) {
  auto h = hashes(img);
  return select_fingerprint(h, cfg_.fingerprint_size);
}

std::string to_blfp(const Fingerprint& fp) {
  if (fp.digests.size() > 0xFFFF) {
    throw Error(ErrorCode::kMalformedData, "fingerprint too long for BLFP");
  }
  std::string out;
  out.reserve(kBlfpHeaderBytes + fp.digests.size() * kDigestBytes);
  detail::ByteWriter w(out);
  w.raw("BLFP", 4);
  w.u8(1);
  w.u16(static_cast<std::uint16_t>(fp.digests.size()));
  for (const auto& d : fp.digests) w.raw(d.bytes.data(), kDigestBytes);
  return out;
}

Fingerprint from_blfp(std::string_view bytes) {
  detail::ByteReader r(bytes, "BLFP");
  r.expect_magic("BLFP", 1);
  const std::size_t count = r.u16();
  Fingerprint fp;
  fp.digests.resize(count);
  for (auto& d : fp.digests) r.raw(d.bytes.data(), kDigestBytes);
  r.expect_end();
  for (std::size_t i = 1; i < count; ++i) {
    if (!(fp.digests[i] < fp.digests[i - 1])) {
      throw Error(ErrorCode::kMalformedData,
                  "BLFP digests are not strictly descending");
    }
  }
  fp.source_n = count;
  return fp;
}

void write_blfp(std::ostream& out, const Fingerprint& fp) {
  auto bytes = to_blfp(fp);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace qfp
