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

// Run-length encoding of binary masks.
//
// Runs follow the row-major pixel order and alternate background /
// foreground, starting with background. The leading background run may be
// empty; every later run has length >= 1. This is the canonical form: each
// mask has exactly one encoding.
//
// Note: COCO tooling walks pixels column-major. Interop with COCO RLE
// requires transposing the mask first.

#ifndef MASKREFINE_RLE_HPP
#define MASKREFINE_RLE_HPP

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "maskrefine/error.hpp"
#include "maskrefine/mask.hpp"

namespace maskrefine {

struct RleMask {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint32_t> counts;

  friend bool operator==(const RleMask&, const RleMask&) = default;
};

/// Throws FormatError unless `rle` is in canonical form and covers exactly
/// width*height pixels.
inline void check_rle(const RleMask& rle) {
  if (rle.width == 0 || rle.height == 0) {
    throw FormatError("rle: width and height must be >= 1");
  }
  std::size_t total = 0;
  for (std::size_t i = 0; i < rle.counts.size(); ++i) {
    if (i > 0 && rle.counts[i] == 0) {
      throw FormatError("rle: zero-length run at position " + std::to_string(i));
    }
    total += rle.counts[i];
  }
  if (total != rle.width * rle.height) {
    throw FormatError("rle: counts sum " + std::to_string(total) + " != " +
                      std::to_string(rle.width * rle.height));
  }
}

inline RleMask encode(const BinaryMask& mask) {
  RleMask rle{mask.width(), mask.height(), {}};
  auto bits = mask.bits();
  std::uint8_t current = 0;
  std::uint32_t run = 0;
  for (auto b : bits) {
    if (b != current) {
      rle.counts.push_back(run);
      current = b;
      run = 0;
    }
    ++run;
  }
  rle.counts.push_back(run);
  return rle;
}

inline BinaryMask decode(const RleMask& rle) {
  check_rle(rle);
  std::vector<std::uint8_t> bits;
  bits.reserve(rle.width * rle.height);
  std::uint8_t value = 0;
  for (auto c : rle.counts) {
    bits.insert(bits.end(), c, value);
    value ^= 1;
  }
  return BinaryMask(rle.width, rle.height, std::move(bits));
}

/// Foreground pixel count without decoding.
inline std::size_t rle_area(const RleMask& rle) noexcept {
  std::size_t area = 0;
  for (std::size_t i = 1; i < rle.counts.size(); i += 2) area += rle.counts[i];
  return area;
}

/// Calls fn(begin, end) for every foreground run, as half-open pixel ranges.
template <typename Fn>
void for_each_foreground_run(const RleMask& rle, Fn&& fn) {
  std::size_t pos = 0;
  for (std::size_t i = 0; i < rle.counts.size(); ++i) {
    const std::size_t next = pos + rle.counts[i];
    if (i % 2 == 1) fn(pos, next);
    pos = next;
  }
}

// JSON shape: {"w": u-int, "h": u-int, "counts": [u-int, ...]}.

inline nlohmann::json to_json(const RleMask& rle) {
  nlohmann::json j;
  j["w"] = rle.width;
  j["h"] = rle.height;
  j["counts"] = rle.counts;
  return j;
}

namespace detail {

inline std::uint32_t json_u32(const nlohmann::json& v, const char* field) {
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
    throw FormatError(std::string("expected unsigned integer for ") + field);
  }
  const auto x = v.get<std::uint64_t>();
  if (x > 0xffffffffu) throw FormatError(std::string(field) + " out of range");
  return static_cast<std::uint32_t>(x);
}

inline std::vector<std::uint32_t> json_counts(const nlohmann::json& v) {
  if (!v.is_array()) throw FormatError("\"counts\" must be an array");
  std::vector<std::uint32_t> out;
  out.reserve(v.size());
  for (const auto& c : v) out.push_back(json_u32(c, "counts"));
  return out;
}

}  // namespace detail

inline RleMask rle_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw FormatError("rle: expected a JSON object");
  if (!j.contains("w") || !j.contains("h") || !j.contains("counts")) {
    throw FormatError("rle: missing \"w\", \"h\" or \"counts\"");
  }
  RleMask rle{detail::json_u32(j.at("w"), "w"), detail::json_u32(j.at("h"), "h"),
              detail::json_counts(j.at("counts"))};
  check_rle(rle);
  return rle;
}

}  // namespace maskrefine

#endif  // MASKREFINE_RLE_HPP
