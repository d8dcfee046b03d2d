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

// Two-stage teacher-student training over a per-pixel logistic model.
//
// Stage 1 (burn-in) fits the model on labeled data only. Stage 2 copies the
// burn-in parameters into a teacher and a student. Each step the teacher
// labels the unlabeled images, the student descends on
//
//   lambda_sup * L_sup(labeled) + lambda_unsup * L_unsup(unlabeled)
//
// and the teacher tracks the student by exponential moving average. The
// teacher never receives gradients.
//
// Three regimes share the burn-in parameters:
//   kSupervised  labeled term only (burn-in continued),
//   kBaseline    plain BCE against the binarized teacher,
//   kRefined     pseudo-labels refined against the proposal library;
//                items that fall back are trained with PWA weights.

#ifndef MASKREFINE_TRAINER_HPP
#define MASKREFINE_TRAINER_HPP

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "maskrefine/error.hpp"
#include "maskrefine/features.hpp"
#include "maskrefine/mask.hpp"
#include "maskrefine/parallel.hpp"
#include "maskrefine/proposal_store.hpp"
#include "maskrefine/pwa_loss.hpp"
#include "maskrefine/random.hpp"
#include "maskrefine/refiner.hpp"

namespace maskrefine {

inline constexpr double kDefaultEmaAlpha = 0.996;

struct ModelParams {
  std::vector<double> weights;
  double bias = 0.0;

  static ModelParams zeros(std::size_t channels) { return {std::vector<double>(channels, 0.0), 0.0}; }

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

struct EmaState {
  ModelParams teacher;
  double alpha = kDefaultEmaAlpha;
};

struct TrainConfig {
  std::size_t burn_in_steps = 60;
  std::size_t mutual_steps = 300;
  double learning_rate = 2.0;
  double ema_alpha = kDefaultEmaAlpha;
  // Std-dev of zero-mean uniform noise added to the student's view of
  // unlabeled features; stands in for image augmentation.
  double jitter = 0.0;
  LossConfig loss;
  PwaConfig pwa;
  MatchConfig match;
  std::uint64_t seed = 0;
  std::size_t workers = 1;

  void validate() const {
    if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be > 0");
    if (!(ema_alpha >= 0.0 && ema_alpha <= 1.0)) throw ValidationError("ema_alpha must lie in [0,1]");
    if (!(jitter >= 0.0)) throw ValidationError("jitter must be >= 0");
    if (!(loss.lambda_sup >= 0.0) || !(loss.lambda_unsup >= 0.0)) {
      throw ValidationError("loss weights must be >= 0");
    }
    pwa.validate();
    match.validate();
  }
};

struct LabeledItem {
  FeatureField features;
  BinaryMask gt;
};

struct UnlabeledItem {
  std::string image_id;
  FeatureField features;
};

struct UnlabeledCorpus {
  std::vector<UnlabeledItem> items;
  ProposalLibrary proposals;
};

inline double logistic(double z) noexcept {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline double linear_response(const ModelParams& params, std::span<const double> x) noexcept {
  double z = params.bias;
  for (std::size_t c = 0; c < x.size(); ++c) z += params.weights[c] * x[c];
  return z;
}

inline SoftMask predict(const ModelParams& params, const FeatureField& features) {
  if (params.weights.size() != features.channels()) {
    throw DimensionError("predict: model has " + std::to_string(params.weights.size()) +
                         " channels, features have " + std::to_string(features.channels()));
  }
  std::vector<double> probs(features.pixels());
  for (std::size_t j = 0; j < probs.size(); ++j) {
    probs[j] = logistic(linear_response(params, features.pixel(j)));
  }
  return SoftMask(features.width(), features.height(), std::move(probs));
}

/// theta_t <- alpha * theta_t + (1 - alpha) * theta_s
inline EmaState ema_update(const EmaState& state, const ModelParams& student) {
  if (state.teacher.weights.size() != student.weights.size()) {
    throw DimensionError("ema_update: teacher and student sizes differ");
  }
  const double a = state.alpha;
  EmaState next{state.teacher, a};
  for (std::size_t i = 0; i < student.weights.size(); ++i) {
    next.teacher.weights[i] = a * state.teacher.weights[i] + (1.0 - a) * student.weights[i];
  }
  next.teacher.bias = a * state.teacher.bias + (1.0 - a) * student.bias;
  return next;
}

struct LossAndGradient {
  double loss = 0.0;
  ModelParams grad;
};

/// Mean (optionally weighted) pixel BCE of the model on one image, with the
/// exact gradient w.r.t. the parameters. Pixels whose prediction sits in the
/// log clamp contribute zero gradient, matching the clamped loss.
inline LossAndGradient bce_gradient(const ModelParams& params, const FeatureField& features,
                                    const BinaryMask& target, const WeightMap* weights = nullptr) {
  require_same_shape(features.width(), features.height(), target.width(), target.height(),
                     "bce_gradient");
  if (params.weights.size() != features.channels()) throw DimensionError("bce_gradient: channel mismatch");
  if (weights && weights->weights.size() != target.size()) {
    throw DimensionError("bce_gradient: weight map size mismatch");
  }
  const std::size_t n = features.pixels();
  LossAndGradient out{0.0, ModelParams::zeros(features.channels())};
  for (std::size_t j = 0; j < n; ++j) {
    const auto x = features.pixel(j);
    const double p = logistic(linear_response(params, x));
    const bool y = target[j];
    const double w = weights ? weights->weights[j] : 1.0;
    out.loss += w * pixel_bce(p, y);
    if (p <= kLogClamp || p >= 1.0 - kLogClamp) continue;
    const double r = w * (p - (y ? 1.0 : 0.0));
    for (std::size_t c = 0; c < x.size(); ++c) out.grad.weights[c] += r * x[c];
    out.grad.bias += r;
  }
  const double inv = 1.0 / static_cast<double>(n);
  out.loss *= inv;
  for (auto& g : out.grad.weights) g *= inv;
  out.grad.bias *= inv;
  return out;
}

namespace detail {

inline void axpy(ModelParams& y, double a, const ModelParams& x) {
  for (std::size_t i = 0; i < y.weights.size(); ++i) y.weights[i] += a * x.weights[i];
  y.bias += a * x.bias;
}

// Mean of per-image losses/gradients, accumulated in item order.
inline LossAndGradient supervised_term(const ModelParams& params,
                                       std::span<const LabeledItem> labeled) {
  LossAndGradient acc{0.0, ModelParams::zeros(params.weights.size())};
  for (const auto& item : labeled) {
    const auto g = bce_gradient(params, item.features, item.gt);
    acc.loss += g.loss;
    axpy(acc.grad, 1.0, g.grad);
  }
  const double inv = 1.0 / static_cast<double>(labeled.size());
  acc.loss *= inv;
  for (auto& w : acc.grad.weights) w *= inv;
  acc.grad.bias *= inv;
  return acc;
}

inline std::size_t channel_count(std::span<const LabeledItem> labeled) {
  if (labeled.empty()) throw ValidationError("training needs at least one labeled item");
  const std::size_t c = labeled.front().features.channels();
  for (const auto& item : labeled) {
    if (item.features.channels() != c) throw DimensionError("labeled items disagree on channel count");
  }
  return c;
}

}  // namespace detail

/// Full-batch gradient descent on the supervised loss from zero parameters.
/// `losses`, if given, receives the loss before each step.
inline ModelParams burn_in(std::span<const LabeledItem> labeled, const TrainConfig& cfg,
                           std::vector<double>* losses = nullptr) {
  const std::size_t channels = detail::channel_count(labeled);
  if (!(cfg.learning_rate > 0.0)) throw ValidationError("learning_rate must be > 0");
  ModelParams params = ModelParams::zeros(channels);
  for (std::size_t step = 0; step < cfg.burn_in_steps; ++step) {
    const auto g = detail::supervised_term(params, labeled);
    if (losses) losses->push_back(g.loss);
    detail::axpy(params, -cfg.learning_rate, g.grad);
  }
  return params;
}

enum class Regime { kSupervised, kBaseline, kRefined };

inline std::string_view to_string(Regime r) {
  switch (r) {
    case Regime::kSupervised: return "supervised";
    case Regime::kBaseline: return "baseline";
    case Regime::kRefined: return "semires";
  }
  throw ValidationError("unknown regime");
}

struct OutcomeTally {
  std::size_t replaced = 0;
  std::size_t merged = 0;
  std::size_t fallback = 0;

  std::size_t total() const noexcept { return replaced + merged + fallback; }
  friend bool operator==(const OutcomeTally&, const OutcomeTally&) = default;
};

struct MutualResult {
  ModelParams student;
  ModelParams teacher;
  std::vector<double> losses;  // combined loss per step
  OutcomeTally tally;
};

namespace detail {

struct UnsupervisedItemResult {
  LossAndGradient lg;
  int kind = -1;  // OutcomeKind index, -1 when no refinement ran
};

inline UnsupervisedItemResult unsupervised_item(Regime regime, const ModelParams& student,
                                                const ModelParams& teacher,
                                                const UnlabeledItem& item, const ProposalSet* set,
                                                const TrainConfig& cfg, std::size_t step,
                                                std::size_t index) {
  const SoftMask teacher_soft = predict(teacher, item.features);

  FeatureField view = item.features;
  if (cfg.jitter > 0.0) {
    SplitMix64 rng(SplitMix64::derive(SplitMix64::derive(cfg.seed, step), index));
    const double half_width = std::sqrt(3.0) * cfg.jitter;
    for (auto& v : view.values()) v += rng.uniform(-half_width, half_width);
  }

  if (regime == Regime::kBaseline) {
    return {bce_gradient(student, view, binarize(teacher_soft, cfg.match.binarize_threshold)), -1};
  }
  auto outcome = refine(teacher_soft, *set, cfg.match);
  const int kind = static_cast<int>(outcome.kind.index());
  if (outcome.is_fallback()) {
    const WeightMap w = weight_map(teacher_soft, cfg.pwa);
    return {bce_gradient(student, view, outcome.pseudo_binary, &w), kind};
  }
  return {bce_gradient(student, view, outcome.refined), kind};
}

}  // namespace detail

/// Stage 2 from the given burn-in parameters under one regime.
inline MutualResult run_mutual(Regime regime, const ModelParams& init,
                               std::span<const LabeledItem> labeled,
                               const UnlabeledCorpus& unlabeled, const TrainConfig& cfg) {
  cfg.validate();
  const std::size_t channels = detail::channel_count(labeled);
  if (init.weights.size() != channels) throw DimensionError("run_mutual: init parameter size mismatch");

  std::vector<const ProposalSet*> sets(unlabeled.items.size(), nullptr);
  for (std::size_t i = 0; i < unlabeled.items.size(); ++i) {
    const auto& item = unlabeled.items[i];
    if (item.features.channels() != channels) throw DimensionError("unlabeled item channel mismatch");
    if (regime == Regime::kRefined) {
      auto it = unlabeled.proposals.find(item.image_id);
      if (it == unlabeled.proposals.end()) {
        throw ValidationError("no proposal set for unlabeled image \"" + item.image_id + "\"");
      }
      sets[i] = &it->second;
    }
  }

  MutualResult res{init, init, {}, {}};
  EmaState ema{init, cfg.ema_alpha};
  const bool use_unlabeled = regime != Regime::kSupervised && !unlabeled.items.empty();

  for (std::size_t step = 0; step < cfg.mutual_steps; ++step) {
    const auto sup = detail::supervised_term(res.student, labeled);
    ModelParams grad = ModelParams::zeros(channels);
    detail::axpy(grad, cfg.loss.lambda_sup, sup.grad);
    double unsup_loss = 0.0;

    if (use_unlabeled) {
      const auto items = parallel_map(unlabeled.items.size(), cfg.workers, [&](std::size_t i) {
        return detail::unsupervised_item(regime, res.student, ema.teacher, unlabeled.items[i],
                                         sets[i], cfg, step, i);
      });
      ModelParams ug = ModelParams::zeros(channels);
      for (const auto& r : items) {
        unsup_loss += r.lg.loss;
        detail::axpy(ug, 1.0, r.lg.grad);
        switch (r.kind) {
          case 0: ++res.tally.replaced; break;
          case 1: ++res.tally.merged; break;
          case 2: ++res.tally.fallback; break;
          default: break;
        }
      }
      const double inv = 1.0 / static_cast<double>(items.size());
      unsup_loss *= inv;
      detail::axpy(grad, cfg.loss.lambda_unsup * inv, ug);
    }

    res.losses.push_back(combined_loss(sup.loss, unsup_loss, cfg.loss));
    detail::axpy(res.student, -cfg.learning_rate, grad);
    ema = ema_update(ema, res.student);
  }
  res.teacher = ema.teacher;
  return res;
}

/// Pooled IoU of the model's binarized predictions against ground truth.
inline double evaluate_oiou(const ModelParams& params, std::span<const LabeledItem> heldout,
                            double threshold = kDefaultBinarizeThreshold) {
  if (heldout.empty()) throw ValidationError("evaluate_oiou: empty held-out set");
  std::size_t inter = 0, uni = 0;
  for (const auto& item : heldout) {
    const auto pred = binarize(predict(params, item.features), threshold);
    inter += intersection_count(pred, item.gt);
    uni += union_count(pred, item.gt);
  }
  return score::iou(inter, uni);
}

struct RegimeReport {
  Regime regime = Regime::kSupervised;
  double oiou_student = 0.0;
  double oiou_teacher = 0.0;
  std::vector<double> losses;
  ModelParams student;
};

struct TrainReport {
  std::vector<double> burn_in_losses;
  double burn_in_oiou = 0.0;
  std::array<RegimeReport, 3> regimes;  // supervised, baseline, semires
  OutcomeTally tally;                   // refinement outcomes of the semires regime
  std::size_t refinement_calls = 0;

  const RegimeReport& regime(Regime r) const { return regimes[static_cast<std::size_t>(r)]; }
};

/// Burn-in followed by all three stage-2 regimes, evaluated on `heldout`.
inline TrainReport mutual_learn(std::span<const LabeledItem> labeled,
                                const UnlabeledCorpus& unlabeled,
                                std::span<const LabeledItem> heldout, const TrainConfig& cfg) {
  cfg.validate();
  TrainReport report;
  const ModelParams theta = burn_in(labeled, cfg, &report.burn_in_losses);
  report.burn_in_oiou = evaluate_oiou(theta, heldout);
  for (Regime r : {Regime::kSupervised, Regime::kBaseline, Regime::kRefined}) {
    auto res = run_mutual(r, theta, labeled, unlabeled, cfg);
    auto& out = report.regimes[static_cast<std::size_t>(r)];
    out.regime = r;
    out.oiou_student = evaluate_oiou(res.student, heldout);
    out.oiou_teacher = evaluate_oiou(res.teacher, heldout);
    out.losses = std::move(res.losses);
    out.student = std::move(res.student);
    if (r == Regime::kRefined) {
      report.tally = res.tally;
      report.refinement_calls = unlabeled.items.size() * cfg.mutual_steps;
    }
  }
  return report;
}

}  // namespace maskrefine

#endif  // MASKREFINE_TRAINER_HPP
