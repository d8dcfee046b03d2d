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

// Pixel-wise weighted adjustment (PWA) and the binary cross-entropy family.
//
// PWA maps a teacher confidence p to a loss weight
//
//   psi(p) = gamma - exp(-(p - mu)^2 / (2 sigma^2)) / (sqrt(2 pi) sigma)
//
// i.e. a constant minus a Gaussian bump centred on mu: confident pixels
// (p near 0 or 1) keep weight close to gamma, ambiguous pixels near mu are
// suppressed.

#ifndef MASKREFINE_PWA_LOSS_HPP
#define MASKREFINE_PWA_LOSS_HPP

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "maskrefine/error.hpp"
#include "maskrefine/mask.hpp"

namespace maskrefine {

inline constexpr double kLogClamp = 1e-7;

struct PwaConfig {
  double gamma = 1.3;
  double sigma2 = 0.1;  // variance, not standard deviation
  double mu = 0.5;

  double peak_density() const { return 1.0 / (std::sqrt(2.0 * std::numbers::pi * sigma2)); }

  /// Throws on unusable parameters; returns human-readable warnings for
  /// legal but suspicious ones.
  std::vector<std::string> validate() const {
    if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) throw ValidationError("sigma2 must be > 0");
    if (!std::isfinite(gamma)) throw ValidationError("gamma must be finite");
    if (!(mu >= 0.0 && mu <= 1.0)) throw ValidationError("mu must lie in [0,1]");
    std::vector<std::string> warnings;
    if (gamma < peak_density()) {
      warnings.push_back("gamma " + std::to_string(gamma) +
                         " is below the Gaussian peak " + std::to_string(peak_density()) +
                         "; pixels near mu get negative weights");
    }
    return warnings;
  }
};

struct WeightMap {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> weights;

  static WeightMap uniform(std::size_t width, std::size_t height, double w = 1.0) {
    return {width, height, std::vector<double>(width * height, w)};
  }
};

struct LossConfig {
  double lambda_sup = 1.0;
  double lambda_unsup = 1.0;
};

inline double psi(double p, const PwaConfig& cfg = {}) {
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("psi: confidence outside [0,1]");
  const double sigma = std::sqrt(cfg.sigma2);
  const double d = p - cfg.mu;
  return cfg.gamma -
         std::exp(-(d * d) / (2.0 * cfg.sigma2)) / (std::sqrt(2.0 * std::numbers::pi) * sigma);
}

inline WeightMap weight_map(const SoftMask& teacher, const PwaConfig& cfg = {}) {
  WeightMap out{teacher.width(), teacher.height(), {}};
  out.weights.reserve(teacher.size());
  for (double p : teacher.probs()) out.weights.push_back(psi(p, cfg));
  return out;
}

/// Per-pixel BCE with the prediction clamped to [kLogClamp, 1 - kLogClamp].
inline double pixel_bce(double p, bool y) noexcept {
  const double q = std::clamp(p, kLogClamp, 1.0 - kLogClamp);
  return y ? -std::log(q) : -std::log1p(-q);
}

/// Mean over pixels of weight_j * BCE(pred_j, target_j).
inline double weighted_bce(const SoftMask& pred, const BinaryMask& target,
                           const WeightMap& weights) {
  require_same_shape(pred.width(), pred.height(), target.width(), target.height(),
                     "weighted_bce");
  require_same_shape(pred.width(), pred.height(), weights.width, weights.height,
                     "weighted_bce: weights");
  if (weights.weights.size() != pred.size()) {
    throw DimensionError("weighted_bce: weight buffer length mismatch");
  }
  double sum = 0.0;
  for (std::size_t j = 0; j < pred.size(); ++j) {
    sum += weights.weights[j] * pixel_bce(pred[j], target[j]);
  }
  return sum / static_cast<double>(pred.size());
}

inline double bce(const SoftMask& pred, const BinaryMask& target) {
  require_same_shape(pred.width(), pred.height(), target.width(), target.height(), "bce");
  double sum = 0.0;
  for (std::size_t j = 0; j < pred.size(); ++j) sum += pixel_bce(pred[j], target[j]);
  return sum / static_cast<double>(pred.size());
}

/// PWA-weighted loss against a teacher: targets are the teacher binarized at
/// `threshold`, weights are psi of the soft teacher confidence.
inline double weighted_bce(const SoftMask& student, const SoftMask& teacher,
                           const PwaConfig& pwa,
                           double threshold = kDefaultBinarizeThreshold) {
  require_same_shape(student.width(), student.height(), teacher.width(), teacher.height(),
                     "weighted_bce");
  return weighted_bce(student, binarize(teacher, threshold), weight_map(teacher, pwa));
}

inline double combined_loss(double sup, double unsup, const LossConfig& cfg = {}) {
  return cfg.lambda_sup * sup + cfg.lambda_unsup * unsup;
}

}  // namespace maskrefine

#endif  // MASKREFINE_PWA_LOSS_HPP
