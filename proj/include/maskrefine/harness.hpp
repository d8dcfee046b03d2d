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

// Toy semi-supervised experiment: synthetic labeled / unlabeled / held-out
// corpora plus the trainer, reported as JSON.

#ifndef MASKREFINE_HARNESS_HPP
#define MASKREFINE_HARNESS_HPP

#include <cstddef>
#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "maskrefine/random.hpp"
#include "maskrefine/synth.hpp"
#include "maskrefine/trainer.hpp"

namespace maskrefine {

struct HarnessConfig {
  std::uint64_t seed = 7;
  std::size_t labeled = 1;
  std::size_t unlabeled = 30;
  std::size_t heldout = 40;
  SceneParams scene = default_scene();
  TrainConfig train = default_train();

  // Clutter-heavy scenes: one labeled image is enough to overfit to
  // clutter that happens to line up with the object.
  static SceneParams default_scene() {
    SceneParams p;
    p.clutter_channels = 24;
    return p;
  }

  static TrainConfig default_train() {
    TrainConfig t;
    t.burn_in_steps = 60;
    t.mutual_steps = 300;
    t.learning_rate = 2.0;
    t.jitter = 0.5;
    return t;
  }
};

struct Corpora {
  std::vector<LabeledItem> labeled;
  UnlabeledCorpus unlabeled;
  std::vector<LabeledItem> heldout;
};

// Disjoint seed streams per split.
inline constexpr std::uint64_t kLabeledStream = 1ULL << 32;
inline constexpr std::uint64_t kUnlabeledStream = 2ULL << 32;
inline constexpr std::uint64_t kHeldoutStream = 3ULL << 32;

inline Corpora make_corpora(const HarnessConfig& cfg) {
  if (cfg.labeled == 0) throw ValidationError("harness needs at least one labeled scene");
  if (cfg.heldout == 0) throw ValidationError("harness needs at least one held-out scene");
  Corpora c;
  for (std::size_t i = 0; i < cfg.labeled; ++i) {
    auto s = gen_scene(SplitMix64::derive(cfg.seed, kLabeledStream + i), cfg.scene);
    c.labeled.push_back({std::move(s.features), std::move(s.gt)});
  }
  for (std::size_t i = 0; i < cfg.unlabeled; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "u%05zu", i);
    auto s = gen_scene(SplitMix64::derive(cfg.seed, kUnlabeledStream + i), cfg.scene, id);
    c.unlabeled.proposals.emplace(s.image_id, std::move(s.proposals));
    c.unlabeled.items.push_back({std::move(s.image_id), std::move(s.features)});
  }
  for (std::size_t i = 0; i < cfg.heldout; ++i) {
    auto s = gen_scene(SplitMix64::derive(cfg.seed, kHeldoutStream + i), cfg.scene);
    c.heldout.push_back({std::move(s.features), std::move(s.gt)});
  }
  return c;
}

inline TrainReport run_harness(const HarnessConfig& cfg) {
  const auto c = make_corpora(cfg);
  TrainConfig train = cfg.train;
  train.seed = cfg.seed;
  return mutual_learn(c.labeled, c.unlabeled, c.heldout, train);
}

inline nlohmann::json to_json(const TrainReport& r, const HarnessConfig& cfg) {
  nlohmann::json j;
  j["seed"] = cfg.seed;
  j["config"] = {{"labeled", cfg.labeled},
                 {"unlabeled", cfg.unlabeled},
                 {"heldout", cfg.heldout},
                 {"burn_in_steps", cfg.train.burn_in_steps},
                 {"mutual_steps", cfg.train.mutual_steps},
                 {"learning_rate", cfg.train.learning_rate},
                 {"ema_alpha", cfg.train.ema_alpha},
                 {"jitter", cfg.train.jitter},
                 {"lambda_sup", cfg.train.loss.lambda_sup},
                 {"lambda_unsup", cfg.train.loss.lambda_unsup},
                 {"pwa", {{"gamma", cfg.train.pwa.gamma},
                          {"sigma2", cfg.train.pwa.sigma2},
                          {"mu", cfg.train.pwa.mu}}},
                 {"match", to_json(cfg.train.match)},
                 {"scene", to_json(cfg.scene)}};
  j["burn_in"] = {{"oiou", r.burn_in_oiou}, {"losses", r.burn_in_losses}};
  j["oiou"] = nlohmann::json::object();
  j["regimes"] = nlohmann::json::object();
  for (const auto& reg : r.regimes) {
    const auto name = std::string(to_string(reg.regime));
    j["oiou"][name] = reg.oiou_student;
    j["regimes"][name] = {{"oiou_student", reg.oiou_student},
                          {"oiou_teacher", reg.oiou_teacher},
                          {"losses", reg.losses}};
  }
  j["refinement"] = {{"calls", r.refinement_calls},
                     {"replaced", r.tally.replaced},
                     {"merged", r.tally.merged},
                     {"fallback", r.tally.fallback}};
  return j;
}

}  // namespace maskrefine

#endif  // MASKREFINE_HARNESS_HPP
