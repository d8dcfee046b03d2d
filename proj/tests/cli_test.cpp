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

#include "commands.hpp"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "gtest/gtest.h"

namespace {

namespace cli = maskrefine::cli;
namespace fs = std::filesystem;
using maskrefine::BinaryMask;
using maskrefine::SoftMask;
using nlohmann::json;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("maskrefine_") + info->test_suite_name() + "_" + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path path(const std::string& name) const { return dir_ / name; }

  void write_soft(const fs::path& p, const SoftMask& m) const {
    fs::create_directories(p.parent_path());
    cli::detail::write_file(p, maskrefine::encode_smsk(maskrefine::to_smsk(m)));
  }

  void write_rle(const fs::path& p, const BinaryMask& m) const {
    fs::create_directories(p.parent_path());
    cli::detail::write_file(p, maskrefine::to_json(maskrefine::encode(m)).dump());
  }

  void write_library(const fs::path& p, const maskrefine::ProposalLibrary& lib) const {
    std::ofstream out(p);
    maskrefine::save_library(lib, out);
  }

  static json read_json(const fs::path& p) { return json::parse(cli::detail::read_file(p)); }

  // The 2x2 scenario: pseudo-label on the top row, proposals are the full
  // square and the bottom-right pixel.
  void write_scenario(const std::string& id) {
    write_soft(path("pseudo") / (id + ".smsk"), SoftMask(2, 2, std::vector<double>{0.9, 0.8, 0.1, 0.2}));
    library_[id] = {id, 2, 2, {maskrefine::encode(BinaryMask::filled(2, 2, true)),
                               maskrefine::encode(BinaryMask(2, 2, {0, 0, 0, 1}))}};
    write_library(path("lib.jsonl"), library_);
  }

  cli::RefineOptions refine_opts() const {
    cli::RefineOptions o;
    o.pseudo = path("pseudo");
    o.proposals = path("lib.jsonl");
    o.out_dir = path("out");
    o.report = path("report.json");
    return o;
  }

  fs::path dir_;
  maskrefine::ProposalLibrary library_;
  std::ostringstream err_;
};

TEST_F(CliTest, RefineEchoesDefaultThresholds) {
  write_scenario("a");
  ASSERT_EQ(cli::cmd_refine(refine_opts(), err_), 0) << err_.str();
  const auto cfg = read_json(path("report.json")).at("config");
  EXPECT_EQ(cfg.at("iou_rate"), 0.5);
  EXPECT_EQ(cfg.at("inter1"), 0.7);
  EXPECT_EQ(cfg.at("inter2"), 0.7);
  EXPECT_EQ(cfg.at("strategy"), "cpi-u");
}

TEST_F(CliTest, RefineEmptyInputDirectory) {
  fs::create_directories(path("pseudo"));
  write_library(path("lib.jsonl"), {});
  ASSERT_EQ(cli::cmd_refine(refine_opts(), err_), 0) << err_.str();
  const auto report = read_json(path("report.json"));
  EXPECT_TRUE(report.at("entries").empty());
  EXPECT_TRUE(report.at("errors").empty());
}

TEST_F(CliTest, RefineWorkedScenario) {
  write_scenario("a");
  auto opts = refine_opts();
  opts.png = true;
  ASSERT_EQ(cli::cmd_refine(opts, err_), 0) << err_.str();
  const auto entry = read_json(path("report.json")).at("entries").at(0);
  EXPECT_EQ(entry.at("image_id"), "a");
  EXPECT_EQ(entry.at("kind"), "merged");
  EXPECT_EQ(entry.at("selected_indices"), json::array({0}));
  EXPECT_EQ(entry.at("iou_with_pseudo"), 0.5);
  EXPECT_EQ(cli::detail::read_file(path("out") / "a.json"), "{\"counts\":[0,4],\"h\":2,\"w\":2}\n");
  EXPECT_EQ(cli::detail::read_file(path("out") / "a.png").substr(1, 3), "PNG");

  opts.match.strategy = maskrefine::Strategy::kIom;
  ASSERT_EQ(cli::cmd_refine(opts, err_), 0);
  const auto fb = read_json(path("report.json")).at("entries").at(0);
  EXPECT_EQ(fb.at("kind"), "fallback");
  EXPECT_TRUE(fb.at("selected_indices").empty());
  EXPECT_TRUE(fb.at("scores").empty());
  EXPECT_EQ(maskrefine::decode(maskrefine::rle_from_json(read_json(path("out") / "a.json"))),
            BinaryMask(2, 2, {1, 1, 0, 0}));
}

TEST_F(CliTest, RefineSingleFileInput) {
  write_scenario("a");
  auto opts = refine_opts();
  opts.pseudo = path("pseudo") / "a.smsk";
  ASSERT_EQ(cli::cmd_refine(opts, err_), 0);
  EXPECT_EQ(read_json(path("report.json")).at("entries").size(), 1u);
}

TEST_F(CliTest, RefineMissingProposalSet) {
  write_scenario("a");
  write_soft(path("pseudo") / "b.smsk", SoftMask(2, 2, 0.9));
  EXPECT_EQ(cli::cmd_refine(refine_opts(), err_), 1);
  auto report = read_json(path("report.json"));
  EXPECT_EQ(report.at("entries").size(), 1u);
  EXPECT_EQ(report.at("errors").at(0).at("image_id"), "b");

  auto opts = refine_opts();
  opts.skip_missing = true;
  EXPECT_EQ(cli::cmd_refine(opts, err_), 0);
  report = read_json(path("report.json"));
  EXPECT_TRUE(report.at("errors").empty());
  EXPECT_EQ(report.at("skipped"), json::array({"b"}));
}

TEST_F(CliTest, RefineItemErrors) {
  write_scenario("a");
  write_soft(path("pseudo") / "big.smsk", SoftMask(3, 3, 0.9));
  library_["big"] = {"big", 2, 2, {maskrefine::encode(BinaryMask::filled(2, 2, true))}};
  write_library(path("lib.jsonl"), library_);
  cli::detail::write_file(path("pseudo") / "bad.smsk", "garbage");
  EXPECT_EQ(cli::cmd_refine(refine_opts(), err_), 1);
  EXPECT_EQ(read_json(path("report.json")).at("errors").size(), 2u);
}

TEST_F(CliTest, RefineUsageErrors) {
  write_scenario("a");
  auto opts = refine_opts();
  opts.match.inter1 = 2.0;
  EXPECT_EQ(cli::cmd_refine(opts, err_), 2);
  opts = refine_opts();
  opts.pseudo = path("nowhere");
  EXPECT_EQ(cli::cmd_refine(opts, err_), 2);
  opts = refine_opts();
  cli::detail::write_file(path("lib.jsonl"), "{oops\n");
  EXPECT_EQ(cli::cmd_refine(opts, err_), 1);
}

TEST_F(CliTest, RefineIsByteIdenticalAcrossWorkers) {
  maskrefine::ProposalLibrary lib;
  for (std::size_t i = 0; i < 12; ++i) {
    const auto s = maskrefine::gen_scene(i, {}, "img" + std::to_string(i));
    write_soft(path("pseudo") / (s.image_id + ".smsk"), s.teacher_sim);
    lib[s.image_id] = s.proposals;
  }
  write_library(path("lib.jsonl"), lib);
  auto opts = refine_opts();
  ASSERT_EQ(cli::cmd_refine(opts, err_), 0);
  const auto first = cli::detail::read_file(path("report.json"));
  const auto mask = cli::detail::read_file(path("out") / "img7.json");
  opts.workers = 4;
  ASSERT_EQ(cli::cmd_refine(opts, err_), 0);
  EXPECT_EQ(cli::detail::read_file(path("report.json")), first);
  EXPECT_EQ(cli::detail::read_file(path("out") / "img7.json"), mask);
}

TEST_F(CliTest, BenchReports) {
  cli::BenchOptions o;
  o.scenes = 20;
  o.out = path("a.json");
  ASSERT_EQ(cli::cmd_bench(o, err_), 0) << err_.str();
  o.out = path("b.json");
  ASSERT_EQ(cli::cmd_bench(o, err_), 0);
  EXPECT_EQ(cli::detail::read_file(path("a.json")), cli::detail::read_file(path("b.json")));
  const auto report = read_json(path("a.json"));
  EXPECT_EQ(report.at("seed"), 42);
  ASSERT_EQ(report.at("strategies").size(), 4u);
  for (const auto& s : report.at("strategies")) EXPECT_TRUE(s.contains("stats"));

  o.strategies = "cpi-u,iom";
  ASSERT_EQ(cli::cmd_bench(o, err_), 0);
  EXPECT_EQ(read_json(path("b.json")).at("strategies").size(), 2u);
}

TEST_F(CliTest, BenchUsageErrors) {
  cli::BenchOptions o;
  o.out = path("a.json");
  o.scenes = 0;
  EXPECT_EQ(cli::cmd_bench(o, err_), 2);
  o.scenes = 5;
  o.mode = "sideways";
  EXPECT_EQ(cli::cmd_bench(o, err_), 2);
  o.mode = "under";
  o.strategies = "iom,best";
  EXPECT_EQ(cli::cmd_bench(o, err_), 2);
  EXPECT_FALSE(fs::exists(path("a.json")));
}

TEST_F(CliTest, PwaConstantHalf) {
  write_soft(path("in.smsk"), SoftMask(3, 2, 0.5));
  cli::PwaOptions o;
  o.soft = path("in.smsk");
  o.out = path("w.smsk");
  ASSERT_EQ(cli::cmd_pwa(o, err_), 0) << err_.str();
  const auto bytes = cli::detail::read_file(path("w.smsk"));
  const auto img = maskrefine::decode_smsk(std::vector<unsigned char>(bytes.begin(), bytes.end()));
  EXPECT_EQ(img.width, 3u);
  EXPECT_EQ(img.height, 2u);
  for (float w : img.values) EXPECT_NEAR(w, 0.0384337, 1e-7);
}

TEST_F(CliTest, PwaSinglePixel) {
  write_soft(path("in.smsk"), SoftMask(1, 1, 0.0));
  cli::PwaOptions o{path("in.smsk"), path("w.smsk"), {}};
  ASSERT_EQ(cli::cmd_pwa(o, err_), 0);
  const auto bytes = cli::detail::read_file(path("w.smsk"));
  const auto img = maskrefine::decode_smsk(std::vector<unsigned char>(bytes.begin(), bytes.end()));
  ASSERT_EQ(img.values.size(), 1u);
  EXPECT_NEAR(img.values[0], 0.9385551, 1e-6);
}

TEST_F(CliTest, PwaErrors) {
  auto bytes = maskrefine::encode_smsk(maskrefine::to_smsk(SoftMask(2, 2, 0.5)));
  bytes[1] = 'X';
  cli::detail::write_file(path("bad.smsk"), bytes);
  cli::PwaOptions o{path("bad.smsk"), path("w.smsk"), {}};
  EXPECT_EQ(cli::cmd_pwa(o, err_), 1);
  o.pwa.sigma2 = -1.0;
  EXPECT_EQ(cli::cmd_pwa(o, err_), 2);
}

TEST_F(CliTest, TrainSmallRun) {
  cli::TrainOptions o;
  o.unlabeled = 3;
  o.heldout = 2;
  o.steps = 5;
  o.burn_in = 5;
  o.out = path("a.json");
  ASSERT_EQ(cli::cmd_train(o, err_), 0) << err_.str();
  o.out = path("b.json");
  ASSERT_EQ(cli::cmd_train(o, err_), 0);
  EXPECT_EQ(cli::detail::read_file(path("a.json")), cli::detail::read_file(path("b.json")));
  const auto r = read_json(path("a.json"));
  EXPECT_EQ(r.at("refinement").at("calls"), 15);
  for (const char* k : {"supervised", "baseline", "semires"}) EXPECT_TRUE(r.at("oiou").contains(k));
}

TEST_F(CliTest, TrainWithoutUnlabeledData) {
  cli::TrainOptions o;
  o.unlabeled = 0;
  o.heldout = 3;
  o.steps = 10;
  o.out = path("a.json");
  ASSERT_EQ(cli::cmd_train(o, err_), 0) << err_.str();
  const auto oiou = read_json(path("a.json")).at("oiou");
  EXPECT_EQ(oiou.at("semires"), oiou.at("supervised"));
  EXPECT_EQ(oiou.at("baseline"), oiou.at("supervised"));
}

TEST_F(CliTest, TrainUsageErrors) {
  cli::TrainOptions o;
  o.out = path("a.json");
  o.labeled = 0;
  EXPECT_EQ(cli::cmd_train(o, err_), 2);
  o.labeled = 1;
  o.strategy = "nope";
  EXPECT_EQ(cli::cmd_train(o, err_), 2);
}

class StatsTest : public CliTest {
 protected:
  void SetUp() override {
    CliTest::SetUp();
    for (const char* id : {"x", "y"}) {
      write_rle(path("gt") / (std::string(id) + ".json"), gt_);
      write_rle(path("before") / (std::string(id) + ".json"), before_);
    }
  }

  cli::StatsOptions opts() const { return {path("before"), path("after"), path("gt"), {}, path("s.json")}; }

  BinaryMask gt_{2, 2, {1, 1, 1, 0}};
  BinaryMask before_{2, 2, {1, 0, 0, 0}};
};

TEST_F(StatsTest, AfterEqualsGt) {
  for (const char* id : {"x", "y"}) write_rle(path("after") / (std::string(id) + ".json"), gt_);
  ASSERT_EQ(cli::cmd_stats(opts(), err_), 0) << err_.str();
  const auto s = read_json(path("s.json"));
  EXPECT_EQ(s.at("negative"), 0);
  EXPECT_EQ(s.at("positive"), 2);
}

TEST_F(StatsTest, AfterEqualsBefore) {
  for (const char* id : {"x", "y"}) write_rle(path("after") / (std::string(id) + ".json"), before_);
  ASSERT_EQ(cli::cmd_stats(opts(), err_), 0);
  EXPECT_EQ(read_json(path("s.json")).at("neutral"), 2);
}

TEST_F(StatsTest, FallbacksFromReport) {
  for (const char* id : {"x", "y"}) write_rle(path("after") / (std::string(id) + ".json"), before_);
  json report{{"entries", {{{"image_id", "x"}, {"kind", "fallback"}}, {{"image_id", "y"}, {"kind", "merged"}}}}};
  cli::detail::write_file(path("report.json"), report.dump());
  auto o = opts();
  o.report = path("report.json");
  ASSERT_EQ(cli::cmd_stats(o, err_), 0) << err_.str();
  const auto s = read_json(path("s.json"));
  EXPECT_EQ(s.at("no_correction"), 1);
  EXPECT_EQ(s.at("neutral"), 1);
}

TEST_F(StatsTest, IdMismatch) {
  write_rle(path("after") / "x.json", gt_);
  write_rle(path("after") / "z.json", gt_);
  EXPECT_EQ(cli::cmd_stats(opts(), err_), 1);
  auto o = opts();
  o.gt = path("none");
  EXPECT_EQ(cli::cmd_stats(o, err_), 2);
}

// The installed binary: exit codes for parse-level failures.
int run(const std::string& args) {
  const std::string cmd = std::string(MASKREFINE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST_F(CliTest, BinaryExitCodes) {
  EXPECT_EQ(run("--help"), 0);
  EXPECT_EQ(run("bench --help"), 0);
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("frobnicate"), 2);
  EXPECT_EQ(run("bench --out " + path("b.json").string() + " --bogus"), 2);
  EXPECT_EQ(run("bench --out " + path("b.json").string() + " --scenes 0"), 2);
  EXPECT_EQ(run("bench --out " + path("b.json").string() + " --scenes notanumber"), 2);
  EXPECT_EQ(run("refine --pseudo x --proposals y --out z --report r --strategy best"), 2);
  EXPECT_EQ(run("bench --out " + path("b.json").string() + " --scenes 3"), 0);
  cli::detail::write_file(path("bad.smsk"), "nope");
  EXPECT_EQ(run("pwa --soft " + path("bad.smsk").string() + " --out " + path("w.smsk").string()), 1);
}

}  // namespace
