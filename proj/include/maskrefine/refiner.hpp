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

// Pseudo-label refinement against a proposal library.
//
// Two strategies:
//
//  * IoU-based optimal matching (IOM): scan the proposals in index order and
//    keep the one with the highest IoU, provided it exceeds `iou_rate`. The
//    comparison against the running best is strict, so the earliest index
//    wins ties. The winner replaces the pseudo-label.
//
//  * Composite parts integration (CPI): every proposal whose overlap
//    relative to the pseudo-label exceeds `inter1` (the under-segmentation
//    test) and/or whose overlap relative to itself exceeds `inter2` (the
//    over-segmentation test) is OR-ed into the refined mask. The merged
//    union replaces the pseudo-label; pseudo-label pixels outside every
//    qualifying proposal are dropped.
//
// If nothing qualifies the outcome is Fallback and the refined mask is the
// binarized pseudo-label itself. Callers are expected to switch to
// confidence-weighted supervision in that case.
//
// All thresholds are strict: a score equal to its threshold does not
// qualify.

#ifndef MASKREFINE_REFINER_HPP
#define MASKREFINE_REFINER_HPP

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "maskrefine/error.hpp"
#include "maskrefine/mask.hpp"
#include "maskrefine/proposal_store.hpp"
#include "maskrefine/rle.hpp"

namespace maskrefine {

enum class Strategy { kIom, kCpi, kCpiU, kCpiO };

inline std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::kIom: return "iom";
    case Strategy::kCpi: return "cpi";
    case Strategy::kCpiU: return "cpi-u";
    case Strategy::kCpiO: return "cpi-o";
  }
  throw ValidationError("unknown strategy");
}

inline Strategy parse_strategy(std::string_view name) {
  if (name == "iom") return Strategy::kIom;
  if (name == "cpi") return Strategy::kCpi;
  if (name == "cpi-u" || name == "cpi_u") return Strategy::kCpiU;
  if (name == "cpi-o" || name == "cpi_o") return Strategy::kCpiO;
  throw ValidationError("unknown strategy \"" + std::string(name) + "\"");
}

inline constexpr Strategy kAllStrategies[] = {Strategy::kIom, Strategy::kCpiU,
                                              Strategy::kCpiO, Strategy::kCpi};

struct MatchConfig {
  Strategy strategy = Strategy::kCpiU;
  double iou_rate = 0.5;
  double inter1 = 0.7;
  double inter2 = 0.7;
  double epsilon = kDefaultEpsilon;
  double binarize_threshold = kDefaultBinarizeThreshold;

  void validate() const {
    auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!unit(iou_rate)) throw ValidationError("iou_rate must lie in [0,1]");
    if (!unit(inter1)) throw ValidationError("inter1 must lie in [0,1]");
    if (!unit(inter2)) throw ValidationError("inter2 must lie in [0,1]");
    if (!(epsilon > 0.0)) throw ValidationError("epsilon must be > 0");
    if (!(binarize_threshold > 0.0 && binarize_threshold < 1.0)) {
      throw ValidationError("binarize_threshold must lie in (0,1)");
    }
  }
};

struct Replaced {
  std::size_t index;
  double score;
  friend bool operator==(const Replaced&, const Replaced&) = default;
};

struct PartMatch {
  std::size_t index;
  double s1;  // overlap relative to the pseudo-label
  double s2;  // overlap relative to the proposal
  friend bool operator==(const PartMatch&, const PartMatch&) = default;
};

struct Merged {
  std::vector<PartMatch> parts;  // ascending index
  friend bool operator==(const Merged&, const Merged&) = default;
};

struct Fallback {
  friend bool operator==(const Fallback&, const Fallback&) = default;
};

using OutcomeKind = std::variant<Replaced, Merged, Fallback>;

struct RefinementOutcome {
  BinaryMask refined;
  OutcomeKind kind;
  BinaryMask pseudo_binary;

  bool is_fallback() const noexcept { return std::holds_alternative<Fallback>(kind); }

  friend bool operator==(const RefinementOutcome&, const RefinementOutcome&) = default;
};

inline std::string_view kind_name(const OutcomeKind& kind) {
  if (std::holds_alternative<Replaced>(kind)) return "replaced";
  if (std::holds_alternative<Merged>(kind)) return "merged";
  return "fallback";
}

namespace detail {

// Prefix sums over the pseudo-label so each proposal is scored in
// O(number of runs) straight from its RLE.
class PixelPrefix {
 public:
  explicit PixelPrefix(const BinaryMask& m) : prefix_(m.size() + 1, 0) {
    auto bits = m.bits();
    for (std::size_t i = 0; i < bits.size(); ++i) prefix_[i + 1] = prefix_[i] + bits[i];
  }

  std::size_t total() const noexcept { return prefix_.back(); }

  std::size_t intersection(const RleMask& rle) const {
    std::size_t n = 0;
    for_each_foreground_run(rle, [&](std::size_t b, std::size_t e) {
      n += prefix_[e] - prefix_[b];
    });
    return n;
  }

 private:
  std::vector<std::size_t> prefix_;
};

inline void check_set(const BinaryMask& pseudo, const ProposalSet& set) {
  require_same_shape(pseudo.width(), pseudo.height(), set.width, set.height, "refine");
  for (std::size_t k = 0; k < set.proposals.size(); ++k) {
    const auto& p = set.proposals[k];
    require_same_shape(p.width, p.height, set.width, set.height, "refine: proposal");
    check_rle(p);
  }
}

inline void or_into(std::vector<std::uint8_t>& bits, const RleMask& rle) {
  for_each_foreground_run(rle, [&](std::size_t b, std::size_t e) {
    std::fill(bits.begin() + static_cast<std::ptrdiff_t>(b),
              bits.begin() + static_cast<std::ptrdiff_t>(e), std::uint8_t{1});
  });
}

}  // namespace detail

inline RefinementOutcome refine_iom(const BinaryMask& pseudo, const ProposalSet& set,
                                    const MatchConfig& cfg) {
  detail::check_set(pseudo, set);
  const detail::PixelPrefix prefix(pseudo);
  std::optional<std::size_t> best;
  double top = 0.0;
  for (std::size_t k = 0; k < set.proposals.size(); ++k) {
    const auto& p = set.proposals[k];
    const std::size_t inter = prefix.intersection(p);
    const std::size_t uni = prefix.total() + rle_area(p) - inter;
    const double s = score::iou(inter, uni);
    if (s > cfg.iou_rate && s > top) {
      best = k;
      top = s;
    }
  }
  if (!best) return {pseudo, Fallback{}, pseudo};
  return {decode(set.proposals[*best]), Replaced{*best, top}, pseudo};
}

/// Covers the three CPI variants; `cfg.strategy` selects which tests apply
/// (kCpiU: s1 only, kCpiO: s2 only, anything else: either).
inline RefinementOutcome refine_cpi(const BinaryMask& pseudo, const ProposalSet& set,
                                    const MatchConfig& cfg) {
  detail::check_set(pseudo, set);
  const bool use_under = cfg.strategy != Strategy::kCpiO;
  const bool use_over = cfg.strategy != Strategy::kCpiU;
  const detail::PixelPrefix prefix(pseudo);

  Merged merged;
  std::vector<std::uint8_t> bits(pseudo.size(), 0);
  for (std::size_t k = 0; k < set.proposals.size(); ++k) {
    const auto& p = set.proposals[k];
    const std::size_t area = rle_area(p);
    if (area == 0) {
      throw ValidationError("refine: proposal " + std::to_string(k) + " of \"" +
                            set.image_id + "\" is empty");
    }
    const std::size_t inter = prefix.intersection(p);
    const double s1 = score::overlap_pseudo(inter, prefix.total(), cfg.epsilon);
    const double s2 = score::overlap_candidate(inter, area);
    if ((use_under && s1 > cfg.inter1) || (use_over && s2 > cfg.inter2)) {
      merged.parts.push_back({k, s1, s2});
      detail::or_into(bits, p);
    }
  }
  if (merged.parts.empty()) return {pseudo, Fallback{}, pseudo};
  return {BinaryMask(pseudo.width(), pseudo.height(), std::move(bits)), std::move(merged),
          pseudo};
}

/// Dispatches on the configured strategy after binarizing the teacher's
/// soft prediction.
inline RefinementOutcome refine_binary(const BinaryMask& pseudo, const ProposalSet& set,
                                       const MatchConfig& cfg) {
  switch (cfg.strategy) {
    case Strategy::kIom: return refine_iom(pseudo, set, cfg);
    case Strategy::kCpi:
    case Strategy::kCpiU:
    case Strategy::kCpiO: return refine_cpi(pseudo, set, cfg);
  }
  throw ValidationError("refine: unknown strategy");
}

inline RefinementOutcome refine(const SoftMask& teacher, const ProposalSet& set,
                                const MatchConfig& cfg) {
  cfg.validate();
  return refine_binary(binarize(teacher, cfg.binarize_threshold), set, cfg);
}

}  // namespace maskrefine

#endif  // MASKREFINE_REFINER_HPP
