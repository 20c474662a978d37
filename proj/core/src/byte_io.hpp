#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>

#include "qfp/error.hpp"

namespace qfp::detail {

class ByteWriter {
 public:
  explicit ByteWriter(std::string& out) : out_(out) {}

  void raw(const void* data, std::size_t n) {
    out_.append(static_cast<const char*>(data), n);
  }
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u16(std::uint16_t v) { be(v, 2); }
  void u32(std::uint32_t v) { be(v, 4); }
  void u64(std::uint64_t v) { be(v, 8); }

 private:
  void be(std::uint64_t v, int n) {
    for (int i = n - 1; i >= 0; --i) {
      out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
  }
  std::string& out_;
};

class ByteReader {
 public:
  ByteReader(std::string_view in, std::string_view what)
      : in_(in), what_(what) {}

  void raw(void* dst, std::size_t n) {
    need(n);
    std::memcpy(dst, in_.data() + pos_, n);
    pos_ += n;
  }
  std::string_view view(std::size_t n) {
    need(n);
    auto v = in_.substr(pos_, n);
    pos_ += n;
    return v;
  }
  std::uint8_t u8() { return static_cast<std::uint8_t>(be(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(be(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(be(4)); }
  std::uint64_t u64() { return be(8); }

  std::size_t remaining() const { return in_.size() - pos_; }
  bool done() const { return pos_ == in_.size(); }

  void expect_magic(std::string_view magic, std::uint8_t version) {
    if (view(magic.size()) != magic) {
      throw Error(ErrorCode::kMalformedData,
                  std::string(what_) + ": bad magic");
    }
    if (auto v = u8(); v != version) {
      throw Error(ErrorCode::kMalformedData,
                  std::string(what_) + ": unsupported version " +
                      std::to_string(v));
    }
  }
  void expect_end() {
    if (!done()) {
      throw Error(ErrorCode::kMalformedData,
                  std::string(what_) + ": trailing bytes");
    }
  }

 private:
  void need(std::size_t n) {
    if (in_.size() - pos_ < n) {
      throw Error(ErrorCode::kMalformedData,
                  std::string(what_) + ": truncated");
    }
  }
  std::uint64_t be(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) {
      v = (v << 8) | static_cast<std::uint8_t>(in_[pos_ + i]);
    }
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  std::string_view in_;
  std::string_view what_;
  std::size_t pos_ = 0;
};

}  // namespace qfp::detail
