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

// Seeded synthetic scenes for exercising the refiner and the trainer.
//
// A scene holds one target object made of rectangular parts, a proposal set
// that mimics a multi-scale "segment everything" output (the exact parts,
// optionally the whole object, optional enlarged context segments, and
// distractor segments disjoint from the object), per-pixel features for
// the toy student, and a simulated noisy teacher prediction.
//
// The teacher simulation covers the two classic pseudo-label failures:
// under-segmentation (whole parts missing) and over-segmentation (extra
// blobs outside the object).

#ifndef MASKREFINE_SYNTH_HPP
#define MASKREFINE_SYNTH_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "maskrefine/error.hpp"
#include "maskrefine/features.hpp"
#include "maskrefine/mask.hpp"
#include "maskrefine/parallel.hpp"
#include "maskrefine/proposal_store.hpp"
#include "maskrefine/random.hpp"
#include "maskrefine/refiner.hpp"
#include "maskrefine/rle.hpp"

namespace maskrefine {

enum class CorruptionMode { kUnder, kOver, kMixed };

inline std::string_view to_string(CorruptionMode m) {
  switch (m) {
    case CorruptionMode::kUnder: return "under";
    case CorruptionMode::kOver: return "over";
    case CorruptionMode::kMixed: return "mixed";
  }
  throw ValidationError("unknown corruption mode");
}

inline CorruptionMode parse_corruption_mode(std::string_view name) {
  if (name == "under") return CorruptionMode::kUnder;
  if (name == "over") return CorruptionMode::kOver;
  if (name == "mixed") return CorruptionMode::kMixed;
  throw ValidationError("unknown corruption mode \"" + std::string(name) + "\"");
}

struct CorruptionParams {
  CorruptionMode mode = CorruptionMode::kUnder;
  double part_drop_fraction = 0.5;
  std::size_t noise_blob_count = 2;
  // Larger values push simulated confidences further towards 0 and 1.
  double confidence_sharpness = 2.0;

  void validate() const {
    if (!(part_drop_fraction >= 0.0 && part_drop_fraction <= 1.0)) {
      throw ValidationError("part_drop_fraction must lie in [0,1]");
    }
    if (!(confidence_sharpness > 0.0)) throw ValidationError("confidence_sharpness must be > 0");
  }
};

struct SceneParams {
  std::size_t width = 32;
  std::size_t height = 32;
  std::size_t min_parts = 2;
  std::size_t max_parts = 4;
  // Object bounding-box side as a fraction of the image side.
  double min_object = 0.5;
  double max_object = 0.85;
  bool include_whole = true;
  std::size_t distractor_count = 2;
  std::size_t superset_count = 0;
  std::size_t clutter_channels = 16;
  std::size_t clutter_blobs = 3;
  double feature_noise = 0.6;
  double clutter_noise = 0.1;
  CorruptionParams corruption;

  std::size_t object_min_px(std::size_t side) const {
    return std::max<std::size_t>(2, static_cast<std::size_t>(std::lround(min_object * side)));
  }
  std::size_t object_max_px(std::size_t side) const {
    return std::min(side, static_cast<std::size_t>(std::lround(max_object * side)));
  }

  void validate() const {
    if (width == 0 || height == 0 || width > 256 || height > 256) {
      throw ValidationError("scene size must lie in 1..256 per side");
    }
    if (min_parts == 0) throw ValidationError("scene needs at least one part");
    if (max_parts < min_parts) throw ValidationError("max_parts < min_parts");
    if (!(min_object > 0.0 && min_object <= max_object && max_object <= 1.0)) {
      throw ValidationError("object size fractions must satisfy 0 < min <= max <= 1");
    }
    const std::size_t w = object_min_px(width), h = object_min_px(height);
    if (object_max_px(width) < w || object_max_px(height) < h) {
      throw ValidationError("object size range is empty at this image size");
    }
    if (max_parts > w * h) throw ValidationError("max_parts exceeds the smallest object's pixel count");
    if (!(feature_noise >= 0.0) || !(clutter_noise >= 0.0)) {
      throw ValidationError("noise levels must be >= 0");
    }
    corruption.validate();
  }
};

enum class ProposalRole { kPart, kWhole, kSuperset, kDistractor };

struct Scene {
  std::string image_id;
  FeatureField features;
  BinaryMask gt;
  std::vector<BinaryMask> parts;  // exact partition of gt
  ProposalSet proposals;
  std::vector<ProposalRole> roles;  // parallel to proposals.proposals
  SoftMask teacher_sim;
};

namespace detail {

struct Rect {
  std::size_t x, y, w, h;
};

inline Rect random_rect(SplitMix64& rng, std::size_t width, std::size_t height,
                        std::size_t min_side, std::size_t max_side) {
  const std::size_t w = rng.uniform_int(std::min(min_side, width), std::min(max_side, width));
  const std::size_t h = rng.uniform_int(std::min(min_side, height), std::min(max_side, height));
  const std::size_t x = rng.uniform_int(0, width - w);
  const std::size_t y = rng.uniform_int(0, height - h);
  return {x, y, w, h};
}

inline BinaryMask rect_mask(std::size_t width, std::size_t height, const Rect& r) {
  BinaryMask m(width, height);
  for (std::size_t y = r.y; y < r.y + r.h; ++y)
    for (std::size_t x = r.x; x < r.x + r.w; ++x) m.set(x, y, true);
  return m;
}

// Guillotine split: repeatedly cut the largest splittable piece across its
// longer side.
inline std::vector<Rect> split_rect(SplitMix64& rng, const Rect& box, std::size_t parts) {
  std::vector<Rect> pieces{box};
  while (pieces.size() < parts) {
    auto it = std::max_element(pieces.begin(), pieces.end(), [](const Rect& a, const Rect& b) {
      return a.w * a.h < b.w * b.h;
    });
    Rect r = *it;
    const bool vertical = r.w >= r.h;
    const std::size_t len = vertical ? r.w : r.h;
    const std::size_t cut = rng.uniform_int(1, len - 1);
    Rect a = r, b = r;
    if (vertical) {
      a.w = cut;
      b.x += cut;
      b.w -= cut;
    } else {
      a.h = cut;
      b.y += cut;
      b.h -= cut;
    }
    *it = a;
    pieces.push_back(b);
  }
  return pieces;
}

inline bool intersects(const BinaryMask& a, const BinaryMask& b) {
  auto x = a.bits();
  auto y = b.bits();
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] & y[i]) return true;
  }
  return false;
}

inline void or_assign(BinaryMask& acc, const BinaryMask& m) {
  for (std::size_t i = 0; i < acc.size(); ++i) {
    if (m[i]) acc.set(i, true);
  }
}

template <typename T>
void shuffle(SplitMix64& rng, std::vector<T>& v) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[rng.uniform_int(0, i - 1)]);
  }
}

// Places up to `count` rectangles that avoid `forbidden` and each other.
inline std::vector<BinaryMask> place_disjoint(SplitMix64& rng, const BinaryMask& forbidden,
                                              std::size_t count, std::size_t min_side,
                                              std::size_t max_side) {
  std::vector<BinaryMask> out;
  BinaryMask taken = forbidden;
  for (int attempt = 0; attempt < 100 && out.size() < count; ++attempt) {
    auto m = rect_mask(forbidden.width(), forbidden.height(),
                       random_rect(rng, forbidden.width(), forbidden.height(), min_side, max_side));
    if (intersects(m, taken)) continue;
    or_assign(taken, m);
    out.push_back(std::move(m));
  }
  return out;
}

inline void check_partition(const BinaryMask& gt, std::span<const BinaryMask> parts) {
  BinaryMask acc(gt.width(), gt.height());
  for (const auto& p : parts) {
    require_same_shape(gt.width(), gt.height(), p.width(), p.height(), "corrupt: part");
    if (intersects(acc, p)) throw ValidationError("corrupt: parts overlap");
    or_assign(acc, p);
  }
  if (acc != gt) throw ValidationError("corrupt: parts do not union to gt");
}

}  // namespace detail

/// Simulated teacher output for a ground-truth object with a known part
/// partition. Pixels in the intended pseudo-label get confidence in
/// [0.7, 1]; everything else gets [0, 0.3]. With an empty `parts` list the
/// whole gt is treated as a single part.
inline SoftMask corrupt(const BinaryMask& gt, std::span<const BinaryMask> parts,
                        const CorruptionParams& params, std::uint64_t seed) {
  params.validate();
  std::vector<BinaryMask> whole;
  if (parts.empty()) {
    whole.push_back(gt);
    parts = whole;
  }
  detail::check_partition(gt, parts);

  SplitMix64 rng(seed);
  BinaryMask on = gt;
  const bool under = params.mode != CorruptionMode::kOver;
  const bool over = params.mode != CorruptionMode::kUnder;

  if (under && parts.size() > 1) {
    std::size_t drop = static_cast<std::size_t>(
        std::lround(params.part_drop_fraction * static_cast<double>(parts.size())));
    drop = std::min(drop, parts.size() - 1);
    std::vector<std::size_t> order(parts.size());
    std::iota(order.begin(), order.end(), 0);
    detail::shuffle(rng, order);
    for (std::size_t i = 0; i < drop; ++i) {
      const auto& p = parts[order[i]];
      for (std::size_t j = 0; j < on.size(); ++j) {
        if (p[j]) on.set(j, false);
      }
    }
  }
  if (over && params.noise_blob_count > 0) {
    const std::size_t side = std::min(gt.width(), gt.height());
    const std::size_t lo = std::max<std::size_t>(1, side / 8);
    const std::size_t hi = std::max<std::size_t>(lo, side / 4);
    for (const auto& blob : detail::place_disjoint(rng, gt, params.noise_blob_count, lo, hi)) {
      detail::or_assign(on, blob);
    }
  }

  std::vector<double> probs(gt.size());
  for (std::size_t j = 0; j < probs.size(); ++j) {
    const double spread = 0.3 * std::pow(rng.uniform(), params.confidence_sharpness);
    probs[j] = on[j] ? 1.0 - spread : spread;
  }
  return SoftMask(gt.width(), gt.height(), std::move(probs));
}

inline std::string default_scene_id(std::uint64_t seed) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string id = "scene-";
  for (int shift = 60; shift >= 0; shift -= 4) id.push_back(kHex[(seed >> shift) & 0xf]);
  return id;
}

inline Scene gen_scene(std::uint64_t seed, const SceneParams& params,
                       std::string image_id = {}) {
  params.validate();
  if (image_id.empty()) image_id = default_scene_id(seed);
  const std::size_t W = params.width, H = params.height;
  SplitMix64 rng(seed);

  // Object and its part partition.
  const std::size_t bw = rng.uniform_int(params.object_min_px(W), params.object_max_px(W));
  const std::size_t bh = rng.uniform_int(params.object_min_px(H), params.object_max_px(H));
  const detail::Rect box{rng.uniform_int(0, W - bw), rng.uniform_int(0, H - bh), bw, bh};
  const std::size_t part_count = rng.uniform_int(params.min_parts, params.max_parts);
  std::vector<BinaryMask> parts;
  for (const auto& r : detail::split_rect(rng, box, part_count)) {
    parts.push_back(detail::rect_mask(W, H, r));
  }
  const BinaryMask gt = detail::rect_mask(W, H, box);

  // Proposal library entries.
  std::vector<std::pair<BinaryMask, ProposalRole>> props;
  for (const auto& p : parts) props.emplace_back(p, ProposalRole::kPart);
  if (params.include_whole && parts.size() > 1) props.emplace_back(gt, ProposalRole::kWhole);
  for (std::size_t s = 0; s < params.superset_count; ++s) {
    const std::size_t margin = rng.uniform_int(1, std::max<std::size_t>(1, std::min(W, H) / 8));
    detail::Rect r{box.x > margin ? box.x - margin : 0, box.y > margin ? box.y - margin : 0, 0, 0};
    r.w = std::min(W, box.x + box.w + margin) - r.x;
    r.h = std::min(H, box.y + box.h + margin) - r.y;
    auto m = detail::rect_mask(W, H, r);
    if (m != gt) props.emplace_back(std::move(m), ProposalRole::kSuperset);
  }
  {
    const std::size_t side = std::min(W, H);
    const std::size_t lo = std::max<std::size_t>(1, side / 10);
    const std::size_t hi = std::max<std::size_t>(lo, side / 4);
    for (auto& d : detail::place_disjoint(rng, gt, params.distractor_count, lo, hi)) {
      props.emplace_back(std::move(d), ProposalRole::kDistractor);
    }
  }
  detail::shuffle(rng, props);

  ProposalSet set{image_id, W, H, {}};
  std::vector<ProposalRole> roles;
  for (const auto& [m, role] : props) {
    set.proposals.push_back(encode(m));
    roles.push_back(role);
  }

  // Features: channel 0 is a noisy view of the object, the remaining
  // channels are clutter (random rectangles) unrelated to it.
  const std::size_t C = 1 + params.clutter_channels;
  FeatureField features(W, H, C);
  for (std::size_t j = 0; j < W * H; ++j) {
    features.at(j, 0) = (gt[j] ? 1.0 : 0.0) + params.feature_noise * rng.normal();
  }
  {
    const std::size_t side = std::min(W, H);
    const std::size_t lo = std::max<std::size_t>(1, side * 3 / 16);
    const std::size_t hi = std::max<std::size_t>(lo, side / 2 - 1);
    for (std::size_t c = 1; c < C; ++c) {
      for (std::size_t b = 0; b < params.clutter_blobs; ++b) {
        const auto r = detail::random_rect(rng, W, H, lo, hi);
        for (std::size_t y = r.y; y < r.y + r.h; ++y)
          for (std::size_t x = r.x; x < r.x + r.w; ++x) features.at(y * W + x, c) += 1.0;
      }
      for (std::size_t j = 0; j < W * H; ++j) {
        features.at(j, c) += params.clutter_noise * rng.normal();
      }
    }
  }

  auto teacher = corrupt(gt, parts, params.corruption, SplitMix64::derive(seed, 7));
  return Scene{std::move(image_id), std::move(features), gt, std::move(parts), std::move(set),
               std::move(roles), std::move(teacher)};
}

/// Overall IoU: pooled intersections over pooled unions.
inline MaskScore oiou(std::span<const BinaryMask> preds, std::span<const BinaryMask> gts) {
  if (preds.size() != gts.size()) throw DimensionError("oiou: list lengths differ");
  if (preds.empty()) throw ValidationError("oiou: empty list");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    inter += intersection_count(preds[i], gts[i]);
    uni += union_count(preds[i], gts[i]);
  }
  return MaskScore(score::iou(inter, uni));
}

struct CorrectionStats {
  std::size_t positive = 0;
  std::size_t negative = 0;
  std::size_t neutral = 0;
  std::size_t no_correction = 0;

  std::size_t total() const noexcept { return positive + negative + neutral + no_correction; }
  double positive_rate() const noexcept {
    return total() == 0 ? 0.0 : static_cast<double>(positive) / static_cast<double>(total());
  }
  double negative_rate() const noexcept {
    return total() == 0 ? 0.0 : static_cast<double>(negative) / static_cast<double>(total());
  }

  friend bool operator==(const CorrectionStats&, const CorrectionStats&) = default;
};

enum class Correction { kPositive, kNegative, kNeutral, kNone };

/// Compares a refined mask against the pre-refinement pseudo-label, both
/// scored by IoU with ground truth.
inline Correction classify_correction(const BinaryMask& before, const BinaryMask& after,
                                      const BinaryMask& gt) {
  const double b = iou(before, gt).value();
  const double a = iou(after, gt).value();
  if (a > b) return Correction::kPositive;
  if (a < b) return Correction::kNegative;
  return Correction::kNeutral;
}

inline void tally(CorrectionStats& s, Correction c) {
  switch (c) {
    case Correction::kPositive: ++s.positive; break;
    case Correction::kNegative: ++s.negative; break;
    case Correction::kNeutral: ++s.neutral; break;
    case Correction::kNone: ++s.no_correction; break;
  }
}

inline CorrectionStats correction_stats(std::span<const RefinementOutcome> outcomes,
                                        std::span<const BinaryMask> gts) {
  if (outcomes.size() != gts.size()) throw DimensionError("correction_stats: list lengths differ");
  CorrectionStats s;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const auto& o = outcomes[i];
    tally(s, o.is_fallback() ? Correction::kNone
                             : classify_correction(o.pseudo_binary, o.refined, gts[i]));
  }
  return s;
}

struct BenchConfig {
  std::uint64_t seed = 42;
  std::size_t scene_count = 200;
  SceneParams scene;
  MatchConfig match;  // thresholds; strategy is taken from `strategies`
  std::vector<Strategy> strategies{std::begin(kAllStrategies), std::end(kAllStrategies)};
  std::size_t workers = 1;
};

struct StrategyReport {
  Strategy strategy = Strategy::kCpiU;
  CorrectionStats stats;
  std::size_t replaced = 0;
  std::size_t merged = 0;
  std::size_t fallback = 0;
  std::size_t exact_recoveries = 0;  // refined == gt
  double mean_iou_before = 0.0;
  double mean_iou_after = 0.0;
  double oiou_before = 0.0;
  double oiou_after = 0.0;
};

struct BenchReport {
  BenchConfig config;
  std::vector<StrategyReport> strategies;
};

/// Scene i of a benchmark run. Seeds are derived per index, so any subset
/// or ordering of scenes can be regenerated independently.
inline Scene bench_scene(const BenchConfig& cfg, std::size_t i) {
  char id[32];
  std::snprintf(id, sizeof id, "s%05zu", i);
  return gen_scene(SplitMix64::derive(cfg.seed, i), cfg.scene, id);
}

inline BenchReport run_bench(const BenchConfig& cfg) {
  if (cfg.scene_count == 0) throw ValidationError("run_bench: scene_count must be >= 1");
  if (cfg.strategies.empty()) throw ValidationError("run_bench: no strategies given");
  cfg.scene.validate();
  cfg.match.validate();

  const auto scenes =
      parallel_map(cfg.scene_count, cfg.workers, [&](std::size_t i) { return bench_scene(cfg, i); });
  std::vector<BinaryMask> gts;
  gts.reserve(scenes.size());
  for (const auto& s : scenes) gts.push_back(s.gt);

  BenchReport report{cfg, {}};
  for (Strategy strategy : cfg.strategies) {
    MatchConfig match = cfg.match;
    match.strategy = strategy;
    const auto outcomes = parallel_map(scenes.size(), cfg.workers, [&](std::size_t i) {
      return refine(scenes[i].teacher_sim, scenes[i].proposals, match);
    });

    StrategyReport r;
    r.strategy = strategy;
    r.stats = correction_stats(outcomes, gts);
    std::vector<BinaryMask> before, after;
    double sum_before = 0.0, sum_after = 0.0;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
      const auto& o = outcomes[i];
      if (std::holds_alternative<Replaced>(o.kind)) ++r.replaced;
      else if (std::holds_alternative<Merged>(o.kind)) ++r.merged;
      else ++r.fallback;
      if (o.refined == gts[i]) ++r.exact_recoveries;
      sum_before += iou(o.pseudo_binary, gts[i]).value();
      sum_after += iou(o.refined, gts[i]).value();
      before.push_back(o.pseudo_binary);
      after.push_back(o.refined);
    }
    const double n = static_cast<double>(outcomes.size());
    r.mean_iou_before = sum_before / n;
    r.mean_iou_after = sum_after / n;
    r.oiou_before = oiou(before, gts).value();
    r.oiou_after = oiou(after, gts).value();
    report.strategies.push_back(r);
  }
  return report;
}

inline nlohmann::json to_json(const CorrectionStats& s) {
  return {{"positive", s.positive},
          {"negative", s.negative},
          {"neutral", s.neutral},
          {"no_correction", s.no_correction}};
}

inline nlohmann::json to_json(const MatchConfig& m) {
  return {{"strategy", to_string(m.strategy)},
          {"iou_rate", m.iou_rate},
          {"inter1", m.inter1},
          {"inter2", m.inter2},
          {"epsilon", m.epsilon},
          {"threshold", m.binarize_threshold}};
}

inline nlohmann::json to_json(const SceneParams& p) {
  return {{"width", p.width},
          {"height", p.height},
          {"min_parts", p.min_parts},
          {"max_parts", p.max_parts},
          {"min_object", p.min_object},
          {"max_object", p.max_object},
          {"include_whole", p.include_whole},
          {"distractor_count", p.distractor_count},
          {"superset_count", p.superset_count},
          {"clutter_channels", p.clutter_channels},
          {"clutter_blobs", p.clutter_blobs},
          {"feature_noise", p.feature_noise},
          {"clutter_noise", p.clutter_noise},
          {"corruption",
           {{"mode", to_string(p.corruption.mode)},
            {"part_drop_fraction", p.corruption.part_drop_fraction},
            {"noise_blob_count", p.corruption.noise_blob_count},
            {"confidence_sharpness", p.corruption.confidence_sharpness}}}};
}

inline nlohmann::json to_json(const BenchReport& r) {
  nlohmann::json thresholds = to_json(r.config.match);
  thresholds.erase("strategy");
  nlohmann::json j;
  j["seed"] = r.config.seed;
  j["scene_count"] = r.config.scene_count;
  j["config"] = {{"scene", to_json(r.config.scene)}, {"match", thresholds}};
  j["strategies"] = nlohmann::json::array();
  for (const auto& s : r.strategies) {
    j["strategies"].push_back({{"strategy", to_string(s.strategy)},
                               {"stats", to_json(s.stats)},
                               {"outcomes",
                                {{"replaced", s.replaced},
                                 {"merged", s.merged},
                                 {"fallback", s.fallback}}},
                               {"exact_recoveries", s.exact_recoveries},
                               {"mean_iou_before", s.mean_iou_before},
                               {"mean_iou_after", s.mean_iou_after},
                               {"oiou_before", s.oiou_before},
                               {"oiou_after", s.oiou_after}});
  }
  return j;
}

}  // namespace maskrefine

#endif  // MASKREFINE_SYNTH_HPP
