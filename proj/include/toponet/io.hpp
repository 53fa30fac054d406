#pragma once

// File formats:
//   masks   binary PGM "P5", maxval 255, one byte per pixel holding the label
//   maps    "TLM1" + u32le categories, height, width + f32le payload
//           (category-major, then row-major)
// TLM is also used, without the [0,1] check, for gradients and weights.

#include <array>
#include <bit>
#include <cctype>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "toponet/error.hpp"
#include "toponet/grid.hpp"

namespace toponet {

inline constexpr char kTlmMagic[4] = {'T', 'L', 'M', '1'};
inline constexpr std::size_t kTlmHeaderBytes = 16;
inline constexpr std::uint64_t kTlmMaxElements = std::uint64_t{1} << 31;

/// Raw TLM payload: three dimensions plus floats, no range check.
struct TlmTensor {
  std::uint32_t dim0 = 0;  // categories / channels
  std::uint32_t dim1 = 0;  // height
  std::uint32_t dim2 = 0;  // width
  std::vector<float> values;
};

namespace detail {

inline std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed for " + path.string());
  return bytes;
}

inline void write_file_bytes(const std::filesystem::path& path, std::span<const unsigned char> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

inline std::uint32_t load_u32le(const unsigned char* p) {
  return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) | (std::uint32_t{p[2]} << 16) |
         (std::uint32_t{p[3]} << 24);
}

inline void store_u32le(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int s = 0; s < 32; s += 8) out.push_back(static_cast<unsigned char>((v >> s) & 0xffu));
}

}  // namespace detail

inline TlmTensor decode_tlm(std::span<const unsigned char> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kTlmMagic, 4) != 0) {
    throw FormatError("bad TLM magic (expected \"TLM1\")");
  }
  if (bytes.size() < kTlmHeaderBytes) throw TruncationError("TLM header truncated");
  TlmTensor t;
  t.dim0 = detail::load_u32le(bytes.data() + 4);
  t.dim1 = detail::load_u32le(bytes.data() + 8);
  t.dim2 = detail::load_u32le(bytes.data() + 12);
  if (t.dim0 == 0 || t.dim1 == 0 || t.dim2 == 0) {
    throw FormatError("TLM dimensions must be positive");
  }
  const std::uint64_t n01 = std::uint64_t{t.dim0} * t.dim1;
  if (n01 > kTlmMaxElements || n01 * t.dim2 > kTlmMaxElements) {
    throw FormatError("TLM dimension overflow: " + std::to_string(t.dim0) + "x" +
                      std::to_string(t.dim1) + "x" + std::to_string(t.dim2));
  }
  const std::uint64_t count = n01 * t.dim2;
  const std::uint64_t need = kTlmHeaderBytes + 4 * count;
  if (bytes.size() < need) {
    throw TruncationError("TLM payload truncated: " + std::to_string(bytes.size()) + " bytes, need " +
                          std::to_string(need));
  }
  if (bytes.size() > need) throw FormatError("TLM file has trailing bytes");
  t.values.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    t.values[i] = std::bit_cast<float>(detail::load_u32le(bytes.data() + kTlmHeaderBytes + 4 * i));
  }
  return t;
}

inline std::vector<unsigned char> encode_tlm(std::uint32_t dim0, std::uint32_t dim1, std::uint32_t dim2,
                                             std::span<const float> values) {
  if (std::uint64_t{dim0} * dim1 * dim2 != values.size()) {
    throw ShapeError("TLM dimensions do not match payload size");
  }
  std::vector<unsigned char> out(kTlmMagic, kTlmMagic + 4);
  out.reserve(kTlmHeaderBytes + 4 * values.size());
  detail::store_u32le(out, dim0);
  detail::store_u32le(out, dim1);
  detail::store_u32le(out, dim2);
  for (float v : values) detail::store_u32le(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

inline TlmTensor read_tlm(const std::filesystem::path& path) {
  return decode_tlm(detail::read_file_bytes(path));
}

/// Writes doubles narrowed to float32.
inline void write_tlm(const std::filesystem::path& path, std::uint32_t dim0, std::uint32_t dim1,
                      std::uint32_t dim2, std::span<const double> values) {
  std::vector<float> f(values.begin(), values.end());
  detail::write_file_bytes(path, encode_tlm(dim0, dim1, dim2, f));
}

inline LikelihoodMap map_from_tlm(const TlmTensor& t) {
  std::vector<double> data(t.values.begin(), t.values.end());
  return {t.dim0, t.dim1, t.dim2, std::move(data)};  // range-checks every value
}

inline LikelihoodMap read_map(const std::filesystem::path& path) { return map_from_tlm(read_tlm(path)); }

inline void write_map(const std::filesystem::path& path, const LikelihoodMap& map) {
  write_tlm(path, static_cast<std::uint32_t>(map.categories()), static_cast<std::uint32_t>(map.height()),
            static_cast<std::uint32_t>(map.width()), map.values());
}

// ---------------------------------------------------------------------------
// PGM

namespace detail {

// Parses one whitespace-delimited header integer, skipping '#' comments.
inline std::uint64_t pgm_header_int(std::span<const unsigned char> bytes, std::size_t& pos) {
  while (pos < bytes.size()) {
    if (std::isspace(bytes[pos])) {
      ++pos;
    } else if (bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else {
      break;
    }
  }
  if (pos >= bytes.size() || !std::isdigit(bytes[pos])) throw FormatError("malformed PGM header");
  std::uint64_t v = 0;
  while (pos < bytes.size() && std::isdigit(bytes[pos])) {
    v = v * 10 + (bytes[pos++] - '0');
    if (v > std::numeric_limits<std::uint32_t>::max()) throw FormatError("PGM header value too large");
  }
  return v;
}

}  // namespace detail

/// Decodes a P5 mask; every label must be <= `categories`.
inline LabelMask decode_pgm(std::span<const unsigned char> bytes, std::size_t categories) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') {
    throw FormatError("malformed PGM header (expected binary \"P5\")");
  }
  std::size_t pos = 2;
  const auto width = detail::pgm_header_int(bytes, pos);
  const auto height = detail::pgm_header_int(bytes, pos);
  const auto maxval = detail::pgm_header_int(bytes, pos);
  if (width == 0 || height == 0) throw FormatError("PGM dimensions must be positive");
  if (maxval != 255) throw FormatError("PGM maxval must be 255, got " + std::to_string(maxval));
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw FormatError("malformed PGM header");
  ++pos;  // single whitespace before raster
  const std::uint64_t count = width * height;
  if (bytes.size() - pos < count) {
    throw TruncationError("PGM raster truncated: have " + std::to_string(bytes.size() - pos) +
                          " bytes, need " + std::to_string(count));
  }
  std::vector<std::uint8_t> labels(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                                   bytes.begin() + static_cast<std::ptrdiff_t>(pos + count));
  return LabelMask(categories, height, width, std::move(labels));
}

inline std::vector<unsigned char> encode_pgm(const LabelMask& mask) {
  const std::string header =
      "P5\n" + std::to_string(mask.width()) + " " + std::to_string(mask.height()) + "\n255\n";
  std::vector<unsigned char> out(header.begin(), header.end());
  const auto& v = mask.labels().values();
  out.insert(out.end(), v.begin(), v.end());
  return out;
}

inline LabelMask read_mask(const std::filesystem::path& path, std::size_t categories) {
  return decode_pgm(detail::read_file_bytes(path), categories);
}

inline void write_mask(const std::filesystem::path& path, const LabelMask& mask) {
  detail::write_file_bytes(path, encode_pgm(mask));
}

/// Largest label in a PGM without a category bound (for corpus discovery).
inline std::uint8_t max_label_in_pgm(const std::filesystem::path& path) {
  const auto mask = read_mask(path, 255);
  std::uint8_t m = 0;
  for (auto v : mask.labels().values()) m = std::max(m, v);
  return m;
}

}  // namespace toponet
