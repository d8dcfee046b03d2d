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

// Binary and soft masks, pixel-set algebra and the three matching scores
// used by the refiner: IoU, overlap relative to the pseudo-label, and
// overlap relative to the candidate.
//
// All counts are exact integers. Every score is produced by a single
// floating-point division of those counts, so any independent per-pixel
// loop that computes the same counts reproduces the score bit for bit.

#ifndef MASKREFINE_MASK_HPP
#define MASKREFINE_MASK_HPP

#include <algorithm>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "maskrefine/error.hpp"

namespace maskrefine {

inline constexpr double kDefaultBinarizeThreshold = 0.5;
inline constexpr double kDefaultEpsilon = 1e-6;

namespace detail {

inline void check_extent(std::size_t width, std::size_t height,
                         std::size_t length, const char* what) {
  if (width == 0 || height == 0) {
    throw ValidationError(std::string(what) + ": width and height must be >= 1");
  }
  if (length != width * height) {
    throw ValidationError(std::string(what) + ": buffer length " +
                          std::to_string(length) + " != " +
                          std::to_string(width) + "*" + std::to_string(height));
  }
}

}  // namespace detail

/// Hard pixel set over a width x height raster, stored row-major as 0/1
/// bytes.
class BinaryMask {
 public:
  BinaryMask(std::size_t width, std::size_t height)
      : width_(width), height_(height), bits_(width * height, 0) {
    detail::check_extent(width, height, bits_.size(), "BinaryMask");
  }

  BinaryMask(std::size_t width, std::size_t height, std::vector<std::uint8_t> bits)
      : width_(width), height_(height), bits_(std::move(bits)) {
    detail::check_extent(width, height, bits_.size(), "BinaryMask");
    for (auto b : bits_) {
      if (b > 1) throw ValidationError("BinaryMask: bits must be 0 or 1");
    }
  }

  BinaryMask(std::size_t width, std::size_t height,
             std::initializer_list<int> bits)
      : BinaryMask(width, height, to_bytes(bits)) {}

  static BinaryMask filled(std::size_t width, std::size_t height, bool value) {
    BinaryMask m(width, height);
    std::fill(m.bits_.begin(), m.bits_.end(), value ? 1 : 0);
    return m;
  }

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t size() const noexcept { return bits_.size(); }

  bool operator[](std::size_t i) const noexcept { return bits_[i] != 0; }
  bool at(std::size_t x, std::size_t y) const { return bits_.at(y * width_ + x) != 0; }

  void set(std::size_t i, bool v) { bits_.at(i) = v ? 1 : 0; }
  void set(std::size_t x, std::size_t y, bool v) { set(y * width_ + x, v); }

  std::span<const std::uint8_t> bits() const noexcept { return bits_; }

  std::size_t area() const noexcept {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), 1));
  }
  bool empty() const noexcept { return area() == 0; }

  bool same_shape(const BinaryMask& o) const noexcept {
    return width_ == o.width_ && height_ == o.height_;
  }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  static std::vector<std::uint8_t> to_bytes(std::initializer_list<int> bits) {
    std::vector<std::uint8_t> out;
    out.reserve(bits.size());
    for (int b : bits) {
      if (b != 0 && b != 1) throw ValidationError("BinaryMask: bits must be 0 or 1");
      out.push_back(static_cast<std::uint8_t>(b));
    }
    return out;
  }

  std::size_t width_;
  std::size_t height_;
  std::vector<std::uint8_t> bits_;
};

/// Per-pixel foreground confidence in [0, 1], row-major.
class SoftMask {
 public:
  SoftMask(std::size_t width, std::size_t height, double fill = 0.0)
      : width_(width), height_(height), probs_(width * height, fill) {
    detail::check_extent(width, height, probs_.size(), "SoftMask");
    check_range();
  }

  SoftMask(std::size_t width, std::size_t height, std::vector<double> probs)
      : width_(width), height_(height), probs_(std::move(probs)) {
    detail::check_extent(width, height, probs_.size(), "SoftMask");
    check_range();
  }

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t size() const noexcept { return probs_.size(); }

  double operator[](std::size_t i) const noexcept { return probs_[i]; }
  std::span<const double> probs() const noexcept { return probs_; }

  friend bool operator==(const SoftMask&, const SoftMask&) = default;

 private:
  void check_range() const {
    for (double p : probs_) {
      // Written so that NaN fails too.
      if (!(p >= 0.0 && p <= 1.0)) {
        throw ValidationError("SoftMask: probability outside [0,1]");
      }
    }
  }

  std::size_t width_;
  std::size_t height_;
  std::vector<double> probs_;
};

/// A matching score in [0, 1].
class MaskScore {
 public:
  constexpr MaskScore() = default;
  explicit MaskScore(double value) : value_(value) {
    if (!(value >= 0.0 && value <= 1.0)) {
      throw ValidationError("MaskScore: value outside [0,1]");
    }
  }

  constexpr double value() const noexcept { return value_; }

  friend constexpr auto operator<=>(const MaskScore&, const MaskScore&) = default;

 private:
  double value_ = 0.0;
};

/// Output bit is 1 iff p >= threshold.
inline BinaryMask binarize(const SoftMask& soft,
                           double threshold = kDefaultBinarizeThreshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw ValidationError("binarize: threshold must lie in (0,1)");
  }
  std::vector<std::uint8_t> bits(soft.size());
  for (std::size_t i = 0; i < soft.size(); ++i) {
    bits[i] = soft[i] >= threshold ? 1 : 0;
  }
  return BinaryMask(soft.width(), soft.height(), std::move(bits));
}

inline std::size_t intersection_count(const BinaryMask& a, const BinaryMask& b) {
  require_same_shape(a.width(), a.height(), b.width(), b.height(),
                     "intersection_count");
  auto x = a.bits();
  auto y = b.bits();
  std::size_t n = 0;
  for (std::size_t i = 0; i < x.size(); ++i) n += x[i] & y[i];
  return n;
}

inline std::size_t union_count(const BinaryMask& a, const BinaryMask& b) {
  require_same_shape(a.width(), a.height(), b.width(), b.height(), "union_count");
  auto x = a.bits();
  auto y = b.bits();
  std::size_t n = 0;
  for (std::size_t i = 0; i < x.size(); ++i) n += x[i] | y[i];
  return n;
}

// Score kernels over precomputed counts. The refiner evaluates proposals in
// run-length form and shares these so that both paths divide identically.
namespace score {

inline double iou(std::size_t inter, std::size_t uni) noexcept {
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

inline double overlap_pseudo(std::size_t inter, std::size_t pseudo_area,
                             double epsilon) noexcept {
  return static_cast<double>(inter) / (static_cast<double>(pseudo_area) + epsilon);
}

inline double overlap_candidate(std::size_t inter, std::size_t candidate_area) noexcept {
  return static_cast<double>(inter) / static_cast<double>(candidate_area);
}

}  // namespace score

/// Intersection over union. Two empty masks score 0, so an empty
/// pseudo-label never matches a proposal.
inline MaskScore iou(const BinaryMask& a, const BinaryMask& b) {
  require_same_shape(a.width(), a.height(), b.width(), b.height(), "iou");
  std::size_t inter = 0, uni = 0;
  auto x = a.bits();
  auto y = b.bits();
  for (std::size_t i = 0; i < x.size(); ++i) {
    inter += x[i] & y[i];
    uni += x[i] | y[i];
  }
  return MaskScore(score::iou(inter, uni));
}

/// |pseudo ∩ candidate| / (|pseudo| + epsilon).
inline MaskScore overlap_pseudo(const BinaryMask& pseudo, const BinaryMask& candidate,
                                double epsilon = kDefaultEpsilon) {
  if (!(epsilon > 0.0)) throw ValidationError("overlap_pseudo: epsilon must be > 0");
  const std::size_t inter = intersection_count(pseudo, candidate);
  return MaskScore(score::overlap_pseudo(inter, pseudo.area(), epsilon));
}

/// |pseudo ∩ candidate| / |candidate|; the candidate must be non-empty.
inline MaskScore overlap_candidate(const BinaryMask& pseudo, const BinaryMask& candidate) {
  const std::size_t inter = intersection_count(pseudo, candidate);
  const std::size_t area = candidate.area();
  if (area == 0) throw ValidationError("overlap_candidate: empty candidate mask");
  return MaskScore(score::overlap_candidate(inter, area));
}

/// Pixelwise OR of every mask in the list.
inline BinaryMask union_merge(std::span<const BinaryMask> masks) {
  if (masks.empty()) throw ValidationError("union_merge: empty mask list");
  std::vector<std::uint8_t> out(masks.front().bits().begin(),
                                masks.front().bits().end());
  for (const auto& m : masks.subspan(1)) {
    require_same_shape(masks.front().width(), masks.front().height(), m.width(),
                       m.height(), "union_merge");
    auto b = m.bits();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] |= b[i];
  }
  return BinaryMask(masks.front().width(), masks.front().height(), std::move(out));
}

}  // namespace maskrefine

#endif  // MASKREFINE_MASK_HPP
