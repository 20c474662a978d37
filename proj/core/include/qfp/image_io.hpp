#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "qfp/detector.hpp"
#include "qfp/types.hpp"

namespace qfp {

/// Binary PGM (P5) or PPM (P6) with maxval 255. Throws kUnsupportedFormat
/// for anything else and kMalformedData for truncated input.
QueryImage read_pnm(std::string_view bytes);
std::string write_pnm(const QueryImage& img);

// BLQS: "BLQS", u8 version = 1, u32 count, then per record u8 label
// (0 benign, 1 attack), u32 trace id, u32 step, u16 h, u16 w, u8 c, pixels.
// Big-endian. Timestamps are the record positions.
std::string to_blqs(const std::vector<QueryRecord>& records);
std::vector<QueryRecord> from_blqs(std::string_view bytes);

bool looks_like_blqs(std::string_view bytes);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view bytes);

}  // namespace qfp
