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

// Release acceptance checks. Prints one PASS/FAIL line per check and exits
// non-zero if any check fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "commands.hpp"
#include "maskrefine/harness.hpp"
#include "maskrefine/pwa_loss.hpp"
#include "maskrefine/refiner.hpp"
#include "maskrefine/rle.hpp"
#include "maskrefine/synth.hpp"
#include "maskrefine/trainer.hpp"
#include "oracles.hpp"

namespace {

namespace mr = maskrefine;
namespace fs = std::filesystem;
using mr::BinaryMask;
using mr::SplitMix64;

struct Result {
  bool pass = true;
  std::string detail;

  void fail(const std::string& why) {
    if (pass) detail = why;
    pass = false;
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

Result rle_roundtrip() {
  Result r;
  SplitMix64 rng(20261015);
  const auto t0 = Clock::now();
  for (int i = 0; i < 10000; ++i) {
    const std::size_t w = rng.uniform_int(1, 64), h = rng.uniform_int(1, 64);
    const auto m = mr::oracle::random_mask(rng, w, h, rng.uniform());
    const auto rle = mr::encode(m);
    if (mr::decode(rle) != m) r.fail("decode(encode(m)) != m at mask " + std::to_string(i));
    const auto again = mr::to_json(mr::encode(mr::decode(rle))).dump();
    if (again != mr::to_json(rle).dump()) r.fail("re-encode differs at mask " + std::to_string(i));
  }
  const double t = seconds_since(t0);
  if (t >= 5.0) r.fail(fmt("took %.2f s", t));
  if (r.pass) r.detail = fmt("10000 masks in %.2f s", t);
  return r;
}

Result score_oracle() {
  Result r;
  SplitMix64 rng(606);
  for (int i = 0; i < 1000; ++i) {
    const std::size_t w = rng.uniform_int(1, 32), h = rng.uniform_int(1, 32);
    const auto a = mr::oracle::random_mask(rng, w, h, rng.uniform());
    const auto b = mr::oracle::random_nonempty_mask(rng, w, h, rng.uniform());
    const auto c = mr::oracle::counts(a, b);
    if (mr::intersection_count(a, b) != c.inter || mr::union_count(a, b) != c.uni) r.fail("count mismatch");
    if (mr::iou(a, b).value() != mr::oracle::iou(a, b)) r.fail("iou mismatch at pair " + std::to_string(i));
    if (mr::overlap_pseudo(a, b, 1e-6).value() != mr::oracle::overlap_pseudo(a, b, 1e-6)) {
      r.fail("overlap_pseudo mismatch at pair " + std::to_string(i));
    }
    if (mr::overlap_candidate(a, b).value() != mr::oracle::overlap_candidate(a, b)) {
      r.fail("overlap_candidate mismatch at pair " + std::to_string(i));
    }
    // The refiner scores proposals in run-length form; its scores must agree too.
    mr::MatchConfig cfg;
    cfg.strategy = mr::Strategy::kCpi;
    cfg.inter1 = 0.0;
    cfg.inter2 = 1.0;
    const mr::ProposalSet set{"p", w, h, {mr::encode(b)}};
    const auto out = mr::refine_cpi(a, set, cfg);
    if (const auto* m = std::get_if<mr::Merged>(&out.kind)) {
      if (m->parts[0].s1 != mr::oracle::overlap_pseudo(a, b, 1e-6) ||
          m->parts[0].s2 != mr::oracle::overlap_candidate(a, b)) {
        r.fail("refiner score mismatch at pair " + std::to_string(i));
      }
    }
  }
  if (r.pass) r.detail = "1000 pairs exact";
  return r;
}

Result iom_oracle() {
  Result r;
  SplitMix64 rng(707);
  std::size_t replaced = 0;
  for (int i = 0; i < 500; ++i) {
    const auto lib = mr::oracle::random_library(rng, 32, 64);
    mr::MatchConfig cfg;
    cfg.strategy = mr::Strategy::kIom;
    if (i % 2) cfg.iou_rate = rng.uniform(0.0, 0.6);
    const auto out = mr::refine_binary(lib.pseudo, lib.set, cfg);
    const auto expect = mr::oracle::iom(lib.pseudo, lib.masks, cfg.iou_rate);
    const auto* rep = std::get_if<mr::Replaced>(&out.kind);
    if (expect.has_value() != (rep != nullptr) || (rep && rep->index != *expect)) {
      r.fail("selection differs on library " + std::to_string(i));
    }
    if (rep) {
      ++replaced;
      if (out.refined != lib.masks[rep->index]) r.fail("refined mask is not the selected proposal");
    } else if (out.refined != lib.pseudo) {
      r.fail("fallback does not keep the pseudo-label");
    }
  }
  if (r.pass) r.detail = std::to_string(replaced) + "/500 replaced, all agree";
  return r;
}

Result cpi_oracle() {
  Result r;
  SplitMix64 rng(808);
  std::size_t merged = 0;
  using Rule = mr::oracle::CpiRule;
  for (int i = 0; i < 500; ++i) {
    const auto lib = mr::oracle::random_library(rng, 32, 64);
    for (auto [s, rule] : {std::pair{mr::Strategy::kCpiU, Rule::kUnder}, std::pair{mr::Strategy::kCpiO, Rule::kOver},
                           std::pair{mr::Strategy::kCpi, Rule::kEither}}) {
      mr::MatchConfig cfg;
      cfg.strategy = s;
      const auto out = mr::refine_binary(lib.pseudo, lib.set, cfg);
      const auto q = mr::oracle::cpi_qualifiers(lib.pseudo, lib.masks, rule, cfg.inter1, cfg.inter2, cfg.epsilon);
      const auto expect = q.empty() ? lib.pseudo : mr::oracle::union_of(lib.set.width, lib.set.height, lib.masks, q);
      if (out.refined != expect || out.is_fallback() != q.empty()) {
        r.fail("mask differs on library " + std::to_string(i) + " (" + std::string(mr::to_string(s)) + ")");
      }
      if (!q.empty()) ++merged;
      for (int p = 0; p < 3; ++p) {
        std::vector<std::size_t> perm(lib.masks.size());
        std::iota(perm.begin(), perm.end(), 0);
        for (std::size_t k = perm.size(); k > 1; --k) std::swap(perm[k - 1], perm[rng.uniform_int(0, k - 1)]);
        mr::ProposalSet shuffled{lib.set.image_id, lib.set.width, lib.set.height, {}};
        for (std::size_t k : perm) shuffled.proposals.push_back(lib.set.proposals[k]);
        if (mr::refine_binary(lib.pseudo, shuffled, cfg).refined != out.refined) {
          r.fail("not permutation invariant on library " + std::to_string(i));
        }
      }
    }
  }
  if (r.pass) r.detail = std::to_string(merged) + "/1500 merged, all agree, permutation invariant";
  return r;
}

Result pwa_analytics() {
  Result r;
  const double mid = mr::psi(0.5), lo = mr::psi(0.0), hi = mr::psi(1.0);
  if (std::abs(mid - 0.0384337) > 1e-6) r.fail(fmt("psi(0.5) = %.9f", mid));
  if (std::abs(lo - 0.9385551) > 1e-6 || std::abs(hi - 0.9385551) > 1e-6) r.fail(fmt("psi(0), psi(1) = %.9f, %.9f", lo, hi));
  for (double p : {0.0, 0.5, 1.0}) {
    if (std::abs(mr::psi(p) - mr::oracle::psi(p, 1.3, 0.1, 0.5)) > 1e-6) r.fail("differs from direct evaluation");
  }
  double worst = 0.0;
  for (int i = 0; i <= 5000; ++i) {
    const double d = i * 1e-4;
    worst = std::max(worst, std::abs(mr::psi(0.5 + d) - mr::psi(0.5 - d)));
  }
  if (!(worst < 1e-12)) r.fail(fmt("symmetry error %.3g", worst));
  if (r.pass) r.detail = fmt("psi(0.5)=%.7f psi(0)=%.7f max asym %.1e", mid, lo, worst);
  return r;
}

Result ema_contraction() {
  Result r;
  SplitMix64 rng(909);
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    mr::ModelParams t0 = mr::ModelParams::zeros(5), s = mr::ModelParams::zeros(5);
    for (std::size_t i = 0; i < 5; ++i) {
      t0.weights[i] = rng.normal(0.0, 3.0);
      s.weights[i] = rng.normal(0.0, 3.0);
    }
    t0.bias = rng.normal();
    s.bias = rng.normal();
    mr::EmaState st{t0, 0.996};
    for (int n = 0; n < 100; ++n) st = mr::ema_update(st, s);
    const double f = std::pow(0.996, 100);
    for (std::size_t i = 0; i < 5; ++i) {
      worst = std::max(worst, std::abs(st.teacher.weights[i] - (s.weights[i] + f * (t0.weights[i] - s.weights[i]))));
    }
    worst = std::max(worst, std::abs(st.teacher.bias - (s.bias + f * (t0.bias - s.bias))));
  }
  if (!(worst <= 1e-9)) r.fail(fmt("max deviation %.3g", worst));
  if (r.pass) r.detail = fmt("max deviation %.1e", worst);
  return r;
}

Result gradient_check() {
  Result r;
  SplitMix64 rng(1010);
  double worst = 0.0;
  for (int inst = 0; inst < 100; ++inst) {
    const std::size_t w = rng.uniform_int(1, 8), h = rng.uniform_int(1, 8), c = rng.uniform_int(1, 5);
    const auto f = mr::oracle::random_features(rng, w, h, c);
    const auto y = mr::oracle::random_mask(rng, w, h, rng.uniform());
    std::vector<double> soft(w * h);
    for (auto& v : soft) v = rng.uniform();
    const mr::SoftMask teacher(w, h, soft);
    const auto wm = mr::weight_map(teacher);
    const auto hard = mr::binarize(teacher);
    std::vector<double> x(c + 1);
    for (auto& v : x) v = rng.normal(0.0, 0.8);
    const mr::ModelParams p{{x.begin(), x.end() - 1}, x.back()};

    for (bool weighted : {false, true}) {
      auto loss = [&](const std::vector<double>& v) {
        const auto pred = mr::predict({{v.begin(), v.end() - 1}, v.back()}, f);
        return weighted ? mr::weighted_bce(pred, teacher, mr::PwaConfig{}) : mr::bce(pred, y);
      };
      const auto num = mr::oracle::numeric_gradient(loss, x, 1e-5);
      const auto g = weighted ? mr::bce_gradient(p, f, hard, &wm).grad : mr::bce_gradient(p, f, y).grad;
      std::vector<double> a(g.weights);
      a.push_back(g.bias);
      double diff = 0.0, na = 0.0, nn = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) {
        diff += (a[i] - num[i]) * (a[i] - num[i]);
        na += a[i] * a[i];
        nn += num[i] * num[i];
      }
      const double rel = std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nn), 1e-12});
      worst = std::max(worst, rel);
    }
  }
  if (!(worst < 1e-4)) r.fail(fmt("max relative error %.3g", worst));
  if (r.pass) r.detail = fmt("200 gradients, max relative error %.1e", worst);
  return r;
}

Result principle_test() {
  Result r;
  const auto t0 = Clock::now();
  mr::BenchConfig cfg;
  cfg.seed = 42;
  cfg.scene_count = 200;
  cfg.scene.corruption.mode = mr::CorruptionMode::kUnder;
  cfg.strategies = {mr::Strategy::kCpiU};
  const auto report = mr::run_bench(cfg);
  const double t = seconds_since(t0);
  const auto& s = report.strategies.at(0);
  const double exact = static_cast<double>(s.exact_recoveries) / 200.0;
  const double gain = s.mean_iou_after - s.mean_iou_before;
  if (exact < 0.95) r.fail(fmt("exact recovery %.3f", exact));
  if (s.stats.positive_rate() < 0.90) r.fail(fmt("positive rate %.3f", s.stats.positive_rate()));
  if (!(gain > 0.0)) r.fail(fmt("mean IoU gain %.4f", gain));
  if (t >= 30.0) r.fail(fmt("took %.2f s", t));
  if (r.pass) {
    r.detail = fmt("exact %.3f, positive %.3f, ", exact, s.stats.positive_rate()) +
               fmt("mean IoU %.3f -> %.3f in %.2f s", s.mean_iou_before, s.mean_iou_after, t);
  }
  return r;
}

Result end_to_end_ordering() {
  Result r;
  const auto t0 = Clock::now();
  const mr::HarnessConfig cfg;  // shipped harness defaults, seed 7, one worker
  const auto report = mr::run_harness(cfg);
  const double t = seconds_since(t0);
  const double sup = report.regime(mr::Regime::kSupervised).oiou_student;
  const double base = report.regime(mr::Regime::kBaseline).oiou_student;
  const double semi = report.regime(mr::Regime::kRefined).oiou_student;
  if (!(semi >= base + 0.02)) r.fail(fmt("semires %.4f < baseline %.4f + 0.02", semi, base));
  if (!(base > sup)) r.fail(fmt("baseline %.4f <= supervised %.4f", base, sup));
  if (t >= 120.0) r.fail(fmt("took %.1f s", t));
  if (r.pass) r.detail = fmt("oIoU supervised %.4f, baseline %.4f, semires %.4f", sup, base, semi) + fmt(" in %.1f s", t);
  return r;
}

Result default_config() {
  Result r;
  const mr::MatchConfig m;
  if (m.iou_rate != 0.5 || m.inter1 != 0.7 || m.inter2 != 0.7) r.fail("match thresholds");
  if (m.strategy != mr::Strategy::kCpiU) r.fail("default strategy");
  const mr::PwaConfig p;
  if (p.gamma != 1.3 || p.sigma2 != 0.1 || p.mu != 0.5) r.fail("pwa constants");
  if (mr::TrainConfig{}.ema_alpha != 0.996 || mr::EmaState{}.alpha != 0.996 ||
      mr::HarnessConfig{}.train.ema_alpha != 0.996) {
    r.fail("ema rate");
  }
  const mr::TrainConfig t;
  if (t.match.iou_rate != 0.5 || t.match.inter1 != 0.7 || t.match.inter2 != 0.7 || t.pwa.gamma != 1.3 ||
      t.pwa.sigma2 != 0.1 || t.pwa.mu != 0.5) {
    r.fail("trainer defaults");
  }
  if (mr::cli::RefineOptions{}.match.inter1 != 0.7 || mr::cli::PwaOptions{}.pwa.gamma != 1.3) r.fail("cli defaults");
  if (r.pass) r.detail = "0.5/0.7/0.7, 1.3/0.1/0.5, 0.996";
  return r;
}

Result determinism() {
  Result r;
  const fs::path dir = fs::temp_directory_path() / "maskrefine_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir / "pseudo");
  std::ostringstream err;

  mr::ProposalLibrary lib;
  mr::SceneParams sp;
  sp.corruption.mode = mr::CorruptionMode::kMixed;
  for (std::size_t i = 0; i < 40; ++i) {
    const auto s = mr::gen_scene(mr::SplitMix64::derive(5, i), sp, "img" + std::to_string(1000 + i));
    mr::cli::detail::write_file(dir / "pseudo" / (s.image_id + ".smsk"), mr::encode_smsk(mr::to_smsk(s.teacher_sim)));
    lib[s.image_id] = s.proposals;
  }
  {
    std::ofstream out(dir / "lib.jsonl");
    mr::save_library(lib, out);
  }

  auto snapshot = [&](const fs::path& root) {
    std::string all;
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
      if (e.is_regular_file()) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) all += f.filename().string() + "\n" + mr::cli::detail::read_file(f);
    return all;
  };

  std::vector<std::string> refine_runs, bench_runs;
  for (std::size_t workers : {1u, 1u, 4u}) {
    mr::cli::RefineOptions ro;
    ro.pseudo = dir / "pseudo";
    ro.proposals = dir / "lib.jsonl";
    ro.out_dir = dir / "out";
    ro.report = dir / "out" / "report.json";
    ro.workers = workers;
    fs::remove_all(dir / "out");
    if (mr::cli::cmd_refine(ro, err) != 0) r.fail("refine failed: " + err.str());
    refine_runs.push_back(snapshot(dir / "out"));

    mr::cli::BenchOptions bo;
    bo.seed = 42;
    bo.scenes = 100;
    bo.mode = "mixed";
    bo.workers = workers;
    bo.out = dir / "bench.json";
    if (mr::cli::cmd_bench(bo, err) != 0) r.fail("bench failed: " + err.str());
    bench_runs.push_back(mr::cli::detail::read_file(bo.out));
  }
  if (refine_runs[0] != refine_runs[1]) r.fail("refine output differs between runs");
  if (refine_runs[0] != refine_runs[2]) r.fail("refine output differs between worker counts");
  if (bench_runs[0] != bench_runs[1]) r.fail("bench output differs between runs");
  if (bench_runs[0] != bench_runs[2]) r.fail("bench output differs between worker counts");
  fs::remove_all(dir);
  if (r.pass) r.detail = "refine (40 images) and bench (100 scenes) identical across 3 runs, 1 and 4 workers";
  return r;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Result()>>> checks{
      {"rle_roundtrip", rle_roundtrip},
      {"score_oracle_equivalence", score_oracle},
      {"iom_oracle", iom_oracle},
      {"cpi_oracle_and_permutation_invariance", cpi_oracle},
      {"pwa_analytics", pwa_analytics},
      {"ema_contraction", ema_contraction},
      {"gradient_check", gradient_check},
      {"under_segmentation_recovery", principle_test},
      {"end_to_end_ordering", end_to_end_ordering},
      {"default_config_fidelity", default_config},
      {"determinism", determinism},
  };
  int failed = 0;
  for (const auto& [name, fn] : checks) {
    Result res;
    try {
      res = fn();
    } catch (const std::exception& e) {
      res.fail(std::string("exception: ") + e.what());
    }
    std::printf("%s %s: %s\n", res.pass ? "PASS" : "FAIL", name, res.detail.c_str());
    std::fflush(stdout);
    if (!res.pass) ++failed;
  }
  std::printf("%d/%zu checks passed\n", static_cast<int>(checks.size()) - failed, checks.size());
  return failed == 0 ? 0 : 1;
}
