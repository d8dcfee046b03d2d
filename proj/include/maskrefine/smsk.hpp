// Copyright 2026 The maskrefine Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// SMSK: a minimal binary container for soft masks and weight maps.
//
//   offset  size  field
//   0       4     magic "SMSK"
//   4       1     version, 0x01
//   5       4     width,  u32 little-endian
//   9       4     height, u32 little-endian
//   13      4*N   N = width*height IEEE-754 binary32 values, little-endian,
//                 row-major
//
// Soft masks must hold values in [0,1]. Weight maps use the same layout but
// any finite value is allowed.

#ifndef MASKREFINE_SMSK_HPP
#define MASKREFINE_SMSK_HPP

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <iterator>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "maskrefine/error.hpp"
#include "maskrefine/mask.hpp"
#include "maskrefine/pwa_loss.hpp"

namespace maskrefine {

inline constexpr std::array<char, 4> kSmskMagic{'S', 'M', 'S', 'K'};
inline constexpr std::uint8_t kSmskVersion = 0x01;
inline constexpr std::size_t kSmskHeaderSize = 13;

struct SmskImage {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<float> values;
};

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

}  // namespace detail

inline std::string encode_smsk(const SmskImage& img) {
  if (img.values.size() != static_cast<std::size_t>(img.width) * img.height) {
    throw DimensionError("smsk: value count does not match width*height");
  }
  std::string out(kSmskMagic.begin(), kSmskMagic.end());
  out.push_back(static_cast<char>(kSmskVersion));
  detail::put_u32(out, img.width);
  detail::put_u32(out, img.height);
  out.reserve(kSmskHeaderSize + 4 * img.values.size());
  for (float f : img.values) detail::put_u32(out, std::bit_cast<std::uint32_t>(f));
  return out;
}

inline SmskImage decode_smsk(std::span<const unsigned char> bytes) {
  if (bytes.size() < kSmskHeaderSize) throw FormatError("smsk: file shorter than header");
  if (std::memcmp(bytes.data(), kSmskMagic.data(), 4) != 0) throw FormatError("smsk: bad magic");
  if (bytes[4] != kSmskVersion) {
    throw FormatError("smsk: unsupported version " + std::to_string(bytes[4]));
  }
  SmskImage img;
  img.width = detail::get_u32(bytes.data() + 5);
  img.height = detail::get_u32(bytes.data() + 9);
  if (img.width == 0 || img.height == 0) throw FormatError("smsk: zero width or height");
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
  if (bytes.size() != kSmskHeaderSize + 4 * n) {
    throw FormatError("smsk: expected " + std::to_string(kSmskHeaderSize + 4 * n) +
                      " bytes, got " + std::to_string(bytes.size()));
  }
  img.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const float f = std::bit_cast<float>(detail::get_u32(bytes.data() + kSmskHeaderSize + 4 * i));
    if (!std::isfinite(f)) throw FormatError("smsk: non-finite value at " + std::to_string(i));
    img.values[i] = f;
  }
  return img;
}

inline SmskImage read_smsk(std::istream& in) {
  std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(in), {}};
  return decode_smsk(bytes);
}

inline void write_smsk(std::ostream& out, const SmskImage& img) {
  const auto bytes = encode_smsk(img);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("smsk: write failed");
}

inline SoftMask to_soft_mask(const SmskImage& img) {
  std::vector<double> probs(img.values.begin(), img.values.end());
  for (double p : probs) {
    if (!(p >= 0.0 && p <= 1.0)) throw FormatError("smsk: soft mask value outside [0,1]");
  }
  return SoftMask(img.width, img.height, std::move(probs));
}

inline SmskImage to_smsk(const SoftMask& m) {
  SmskImage img{static_cast<std::uint32_t>(m.width()), static_cast<std::uint32_t>(m.height()), {}};
  img.values.reserve(m.size());
  for (double p : m.probs()) img.values.push_back(static_cast<float>(p));
  return img;
}

inline SmskImage to_smsk(const WeightMap& w) {
  SmskImage img{static_cast<std::uint32_t>(w.width), static_cast<std::uint32_t>(w.height), {}};
  img.values.reserve(w.weights.size());
  for (double v : w.weights) img.values.push_back(static_cast<float>(v));
  return img;
}

}  // namespace maskrefine

#endif  // MASKREFINE_SMSK_HPP
