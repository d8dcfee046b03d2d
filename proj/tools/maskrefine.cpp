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

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "commands.hpp"

namespace mr = maskrefine;
namespace cli = maskrefine::cli;

namespace {

void add_match_flags(CLI::App* sub, mr::MatchConfig& m, std::string& strategy) {
  sub->add_option("--iou-rate", m.iou_rate, "IOM replacement threshold")->capture_default_str();
  sub->add_option("--inter1", m.inter1, "coverage-of-pseudo threshold")->capture_default_str();
  sub->add_option("--inter2", m.inter2, "coverage-of-candidate threshold")->capture_default_str();
  sub->add_option("--epsilon", m.epsilon, "denominator guard")->capture_default_str();
  sub->add_option("--threshold", m.binarize_threshold, "binarization threshold")->capture_default_str();
  sub->add_option("--strategy", strategy, "iom | cpi | cpi-u | cpi-o")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pseudo-label refinement and semi-supervised training tools", "maskrefine"};
  app.require_subcommand(1);

  cli::RefineOptions refine;
  std::string refine_strategy{mr::to_string(refine.match.strategy)};
  std::string pseudo, proposals, out_dir, report;
  auto* r = app.add_subcommand("refine", "refine pseudo-masks against a proposal library");
  r->add_option("--pseudo", pseudo, ".smsk file or directory of <image_id>.smsk")->required();
  r->add_option("--proposals", proposals, "proposal library (JSONL)")->required();
  r->add_option("--out", out_dir, "output directory for refined RLE masks")->required();
  r->add_option("--report", report, "JSON report path")->required();
  add_match_flags(r, refine.match, refine_strategy);
  r->add_flag("--skip-missing", refine.skip_missing, "skip images without a proposal set");
  r->add_flag("--png", refine.png, "also write <image_id>.png");
  r->add_option("--workers", refine.workers, "worker threads")->capture_default_str();

  cli::BenchOptions bench;
  std::string bench_out;
  auto* b = app.add_subcommand("bench", "run the synthetic refinement benchmark");
  b->add_option("--seed", bench.seed)->capture_default_str();
  b->add_option("--scenes", bench.scenes)->capture_default_str();
  b->add_option("--mode", bench.mode, "under | over | mixed")->capture_default_str();
  b->add_option("--strategies", bench.strategies, "all, or a comma list")->capture_default_str();
  b->add_option("--size", bench.size, "scene side length")->capture_default_str();
  b->add_option("--out", bench_out, "JSON report path")->required();
  b->add_option("--workers", bench.workers)->capture_default_str();

  cli::PwaOptions pwa;
  std::string soft, pwa_out;
  auto* p = app.add_subcommand("pwa", "write the per-pixel loss weight map of a soft mask");
  p->add_option("--soft", soft, "input .smsk")->required();
  p->add_option("--out", pwa_out, "output .smsk")->required();
  p->add_option("--gamma", pwa.pwa.gamma)->capture_default_str();
  p->add_option("--sigma2", pwa.pwa.sigma2)->capture_default_str();
  p->add_option("--mu", pwa.pwa.mu)->capture_default_str();

  cli::TrainOptions train;
  std::string train_out;
  auto* t = app.add_subcommand("train", "run the toy teacher-student comparison");
  t->add_option("--seed", train.seed)->capture_default_str();
  t->add_option("--labeled", train.labeled)->capture_default_str();
  t->add_option("--unlabeled", train.unlabeled)->capture_default_str();
  t->add_option("--heldout", train.heldout)->capture_default_str();
  t->add_option("--strategy", train.strategy)->capture_default_str();
  t->add_option("--steps", train.steps, "mutual-learning steps")->capture_default_str();
  t->add_option("--burn-in", train.burn_in, "supervised burn-in steps")->capture_default_str();
  t->add_option("--jitter", train.jitter, "student input noise std")->capture_default_str();
  t->add_option("--workers", train.workers)->capture_default_str();
  t->add_option("--out", train_out, "JSON report path")->required();

  cli::StatsOptions stats;
  std::string before, after, gt, stats_report, stats_out;
  auto* s = app.add_subcommand("stats", "classify corrections against ground truth");
  s->add_option("--before", before, "directory of pseudo RLE masks")->required();
  s->add_option("--after", after, "directory of refined RLE masks")->required();
  s->add_option("--gt", gt, "directory of ground-truth RLE masks")->required();
  s->add_option("--report", stats_report, "refine report; marks fallbacks");
  s->add_option("--out", stats_out, "JSON output path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return cli::kExitUsage;
  }

  try {
    if (r->parsed()) {
      refine.match.strategy = mr::parse_strategy(refine_strategy);
      refine.pseudo = pseudo;
      refine.proposals = proposals;
      refine.out_dir = out_dir;
      refine.report = report;
      return cli::cmd_refine(refine, std::cerr);
    }
    if (b->parsed()) {
      bench.out = bench_out;
      return cli::cmd_bench(bench, std::cerr);
    }
    if (p->parsed()) {
      pwa.soft = soft;
      pwa.out = pwa_out;
      return cli::cmd_pwa(pwa, std::cerr);
    }
    if (t->parsed()) {
      train.out = train_out;
      return cli::cmd_train(train, std::cerr);
    }
    if (s->parsed()) {
      stats.before = before;
      stats.after = after;
      stats.gt = gt;
      stats.report = stats_report;
      stats.out = stats_out;
      return cli::cmd_stats(stats, std::cerr);
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "maskrefine: " << e.what() << "\n";
    return cli::kExitUsage;
  }
  return cli::kExitUsage;
}
