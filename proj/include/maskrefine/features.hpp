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

#ifndef MASKREFINE_FEATURES_HPP
#define MASKREFINE_FEATURES_HPP

#include <cstddef>
#include <span>
#include <vector>

#include "maskrefine/error.hpp"

namespace maskrefine {

/// Per-pixel feature vectors, pixel-major: values[j * channels + c].
class FeatureField {
 public:
  FeatureField(std::size_t width, std::size_t height, std::size_t channels)
      : width_(width), height_(height), channels_(channels),
        values_(width * height * channels, 0.0) {
    check();
  }

  FeatureField(std::size_t width, std::size_t height, std::size_t channels,
               std::vector<double> values)
      : width_(width), height_(height), channels_(channels), values_(std::move(values)) {
    check();
  }

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t channels() const noexcept { return channels_; }
  std::size_t pixels() const noexcept { return width_ * height_; }

  std::span<const double> pixel(std::size_t j) const noexcept {
    return {values_.data() + j * channels_, channels_};
  }
  std::span<double> pixel(std::size_t j) noexcept {
    return {values_.data() + j * channels_, channels_};
  }

  double& at(std::size_t j, std::size_t c) { return values_.at(j * channels_ + c); }
  double at(std::size_t j, std::size_t c) const { return values_.at(j * channels_ + c); }

  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }

  friend bool operator==(const FeatureField&, const FeatureField&) = default;

 private:
  void check() const {
    if (width_ == 0 || height_ == 0 || channels_ == 0) {
      throw ValidationError("FeatureField: width, height and channels must be >= 1");
    }
    if (values_.size() != width_ * height_ * channels_) {
      throw ValidationError("FeatureField: buffer length mismatch");
    }
  }

  std::size_t width_;
  std::size_t height_;
  std::size_t channels_;
  std::vector<double> values_;
};

}  // namespace maskrefine

#endif  // MASKREFINE_FEATURES_HPP
