#include "qfp/image_io.hpp"

#include <cctype>
#include <fstream>
#include <iterator>

#include "byte_io.hpp"
#include "qfp/error.hpp"

namespace qfp {

namespace {

// Reads one whitespace-delimited header integer, skipping '#' comments.
unsigned read_header_int(std::string_view bytes, std::size_t& pos) {
  while (pos < bytes.size()) {
    const char c = bytes[pos];
    if (c == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      ++pos;
    } else {
      break;
    }
  }
  unsigned value = 0;
  std::size_t digits = 0;
  while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
    value = value * 10 + static_cast<unsigned>(bytes[pos] - '0');
    if (value > 65535) throw Error(ErrorCode::kMalformedData, "PNM header value too large");
    ++pos;
    ++digits;
  }
  if (digits == 0) throw Error(ErrorCode::kMalformedData, "PNM header truncated");
  return value;
}

}  // namespace

QueryImage read_pnm(std::string_view bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    throw Error(ErrorCode::kUnsupportedFormat,
                "only binary PGM (P5) and PPM (P6) are supported");
  }
  const std::uint8_t channels = bytes[1] == '5' ? 1 : 3;
  std::size_t pos = 2;
  const unsigned width = read_header_int(bytes, pos);
  const unsigned height = read_header_int(bytes, pos);
  const unsigned maxval = read_header_int(bytes, pos);
  if (maxval != 255) {
    throw Error(ErrorCode::kUnsupportedFormat, "only 8-bit PNM (maxval 255) is supported");
  }
  if (width == 0 || height == 0) throw Error(ErrorCode::kMalformedData, "empty PNM image");
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    throw Error(ErrorCode::kMalformedData, "PNM header not terminated");
  }
  ++pos;
  QueryImage img(static_cast<std::uint16_t>(height), static_cast<std::uint16_t>(width),
                 channels);
  if (bytes.size() - pos != img.size()) {
    throw Error(ErrorCode::kMalformedData, "PNM pixel data has wrong length");
  }
  std::copy(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end(),
            img.pixels.begin());
  return img;
}

std::string write_pnm(const QueryImage& img) {
  img.validate();
  std::string out = (img.channels == 1 ? "P5\n" : "P6\n") + std::to_string(img.width) +
                    " " + std::to_string(img.height) + "\n255\n";
  out.append(img.pixels.begin(), img.pixels.end());
  return out;
}

std::string to_blqs(const std::vector<QueryRecord>& records) {
  std::string out;
  detail::ByteWriter w(out);
  w.raw("BLQS", 4);
  w.u8(1);
  w.u32(static_cast<std::uint32_t>(records.size()));
  for (const auto& r : records) {
    r.image.validate();
    w.u8(r.label.is_attack() ? 1 : 0);
    w.u32(r.label.is_attack() ? r.label.attack->trace_id : 0);
    w.u32(r.label.is_attack() ? r.label.attack->step : 0);
    w.u16(r.image.height);
    w.u16(r.image.width);
    w.u8(r.image.channels);
    w.raw(r.image.pixels.data(), r.image.pixels.size());
  }
  return out;
}

std::vector<QueryRecord> from_blqs(std::string_view bytes) {
  detail::ByteReader r(bytes, "BLQS");
  r.expect_magic("BLQS", 1);
  const std::uint32_t count = r.u32();
  std::vector<QueryRecord> out;
  out.reserve(std::min<std::size_t>(count, bytes.size() / 16));
  for (std::uint32_t i = 0; i < count; ++i) {
    QueryRecord rec;
    const std::uint8_t label = r.u8();
    const std::uint32_t trace = r.u32();
    const std::uint32_t step = r.u32();
    if (label > 1) throw Error(ErrorCode::kMalformedData, "BLQS: bad label byte");
    if (label == 1) rec.label = QueryLabel::attack_step(trace, step);
    rec.image.height = r.u16();
    rec.image.width = r.u16();
    rec.image.channels = r.u8();
    if (rec.image.channels != 1 && rec.image.channels != 3) {
      throw Error(ErrorCode::kMalformedData, "BLQS: channels must be 1 or 3");
    }
    const auto pixels = r.view(rec.image.size());
    rec.image.pixels.assign(pixels.begin(), pixels.end());
    rec.timestamp = i;
    out.push_back(std::move(rec));
  }
  r.expect_end();
  return out;
}

bool looks_like_blqs(std::string_view bytes) { return bytes.substr(0, 4) == "BLQS"; }

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kMalformedData, "cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kMalformedData, "cannot write '" + path + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kMalformedData, "write to '" + path + "' failed");
}

}  // namespace qfp
