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

// Subcommand implementations behind the `maskrefine` binary. Each command
// takes a plain options struct, writes its outputs, reports diagnostics on
// `err` and returns the process exit status:
//
//   0  success
//   1  input data or per-item errors
//   2  usage errors (bad flag values, missing paths)

#ifndef MASKREFINE_TOOLS_COMMANDS_HPP
#define MASKREFINE_TOOLS_COMMANDS_HPP

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "maskrefine/harness.hpp"
#include "maskrefine/mask.hpp"
#include "maskrefine/parallel.hpp"
#include "maskrefine/proposal_store.hpp"
#include "maskrefine/pwa_loss.hpp"
#include "maskrefine/refiner.hpp"
#include "maskrefine/rle.hpp"
#include "maskrefine/smsk.hpp"
#include "maskrefine/synth.hpp"
#include "png.hpp"

namespace maskrefine::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitItemError = 1;
inline constexpr int kExitUsage = 2;

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& p, const std::string& bytes) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + p.string());
}

inline std::string pretty(const nlohmann::json& j) { return j.dump(2) + "\n"; }

// Files with `ext` in `dir`, keyed by stem, in lexicographic order.
inline std::map<std::string, fs::path> list_by_stem(const fs::path& dir, const std::string& ext) {
  std::map<std::string, fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ext) out.emplace(e.path().stem().string(), e.path());
  }
  return out;
}

inline bool safe_id(const std::string& id) {
  return !id.empty() && id != "." && id != ".." && id.find('/') == std::string::npos &&
         id.find('\\') == std::string::npos;
}

inline BinaryMask read_rle_mask(const fs::path& p) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(p));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(p.string() + ": " + e.what());
  }
  return decode(rle_from_json(j));
}

inline SoftMask read_soft(const fs::path& p) {
  const auto bytes = read_file(p);
  return to_soft_mask(decode_smsk(
      std::span(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size())));
}

}  // namespace detail

// ---------------------------------------------------------------- refine

struct RefineOptions {
  fs::path pseudo;     // .smsk file or directory of <image_id>.smsk
  fs::path proposals;  // JSONL library
  MatchConfig match;
  fs::path out_dir;
  fs::path report;
  bool skip_missing = false;
  bool png = false;
  std::size_t workers = 1;
};

inline nlohmann::json report_config(const MatchConfig& m) { return to_json(m); }

struct RefineItem {
  std::string image_id;
  std::optional<RefinementOutcome> outcome;
  std::string error;
  bool missing = false;
};

inline nlohmann::json report_entry(const std::string& id, Strategy strategy,
                                   const RefinementOutcome& o) {
  nlohmann::json indices = nlohmann::json::array();
  nlohmann::json scores = nlohmann::json::array();
  if (const auto* r = std::get_if<Replaced>(&o.kind)) {
    indices.push_back(r->index);
    scores.push_back({{"iou", r->score}});
  } else if (const auto* m = std::get_if<Merged>(&o.kind)) {
    for (const auto& p : m->parts) {
      indices.push_back(p.index);
      scores.push_back({{"s1", p.s1}, {"s2", p.s2}});
    }
  }
  return {{"image_id", id},
          {"strategy", to_string(strategy)},
          {"kind", kind_name(o.kind)},
          {"selected_indices", indices},
          {"scores", scores},
          {"iou_with_pseudo", iou(o.refined, o.pseudo_binary).value()}};
}

inline int cmd_refine(const RefineOptions& opt, std::ostream& err) {
  try {
    opt.match.validate();
  } catch (const ValidationError& e) {
    err << "refine: " << e.what() << "\n";
    return kExitUsage;
  }
  if (!fs::exists(opt.pseudo)) {
    err << "refine: --pseudo path does not exist: " << opt.pseudo << "\n";
    return kExitUsage;
  }
  if (opt.out_dir.empty() || opt.report.empty()) {
    err << "refine: --out and --report are required\n";
    return kExitUsage;
  }

  ProposalLibrary lib;
  try {
    std::ifstream in(opt.proposals);
    if (!in) throw std::runtime_error("cannot open " + opt.proposals.string());
    lib = load_library(in);
  } catch (const std::exception& e) {
    err << "refine: proposals: " << e.what() << "\n";
    return kExitItemError;
  }

  std::vector<std::pair<std::string, fs::path>> inputs;
  if (fs::is_directory(opt.pseudo)) {
    for (auto& [id, p] : detail::list_by_stem(opt.pseudo, ".smsk")) inputs.emplace_back(id, p);
  } else {
    inputs.emplace_back(opt.pseudo.stem().string(), opt.pseudo);
  }

  const auto items = parallel_map(inputs.size(), opt.workers, [&](std::size_t i) {
    RefineItem item{inputs[i].first, std::nullopt, {}, false};
    try {
      if (!detail::safe_id(item.image_id)) throw ValidationError("unusable image id");
      auto it = lib.find(item.image_id);
      if (it == lib.end()) {
        item.missing = true;
        item.error = "no proposal set for image";
        return item;
      }
      item.outcome = refine(detail::read_soft(inputs[i].second), it->second, opt.match);
    } catch (const std::exception& e) {
      item.error = e.what();
    }
    return item;
  });

  nlohmann::json report;
  report["config"] = report_config(opt.match);
  report["entries"] = nlohmann::json::array();
  report["errors"] = nlohmann::json::array();
  report["skipped"] = nlohmann::json::array();
  bool failed = false;
  try {
    fs::create_directories(opt.out_dir);
    for (const auto& item : items) {
      if (item.outcome) {
        detail::write_file(opt.out_dir / (item.image_id + ".json"),
                           to_json(encode(item.outcome->refined)).dump() + "\n");
        if (opt.png) {
          detail::write_file(opt.out_dir / (item.image_id + ".png"), encode_png(item.outcome->refined));
        }
        report["entries"].push_back(report_entry(item.image_id, opt.match.strategy, *item.outcome));
      } else if (item.missing && opt.skip_missing) {
        report["skipped"].push_back(item.image_id);
      } else {
        failed = true;
        err << "refine: " << item.image_id << ": " << item.error << "\n";
        report["errors"].push_back({{"image_id", item.image_id}, {"error", item.error}});
      }
    }
    detail::write_file(opt.report, detail::pretty(report));
  } catch (const std::exception& e) {
    err << "refine: " << e.what() << "\n";
    return kExitItemError;
  }
  return failed ? kExitItemError : kExitOk;
}

// ----------------------------------------------------------------- bench

struct BenchOptions {
  std::uint64_t seed = 42;
  std::size_t scenes = 200;
  std::string mode = "under";
  std::string strategies = "all";
  std::size_t size = 32;
  fs::path out;
  std::size_t workers = 1;
  MatchConfig match;
};

inline std::vector<Strategy> parse_strategy_list(const std::string& s) {
  if (s == "all") return {std::begin(kAllStrategies), std::end(kAllStrategies)};
  std::vector<Strategy> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) out.push_back(parse_strategy(tok));
  }
  if (out.empty()) throw ValidationError("empty strategy list");
  return out;
}

inline int cmd_bench(const BenchOptions& opt, std::ostream& err) {
  BenchConfig cfg;
  try {
    if (opt.scenes == 0) throw UsageError("--scenes must be >= 1");
    if (opt.out.empty()) throw UsageError("--out is required");
    cfg.seed = opt.seed;
    cfg.scene_count = opt.scenes;
    cfg.scene.width = cfg.scene.height = opt.size;
    cfg.scene.corruption.mode = parse_corruption_mode(opt.mode);
    cfg.strategies = parse_strategy_list(opt.strategies);
    cfg.match = opt.match;
    cfg.workers = opt.workers;
    cfg.scene.validate();
    cfg.match.validate();
  } catch (const std::invalid_argument& e) {
    err << "bench: " << e.what() << "\n";
    return kExitUsage;
  }
  try {
    detail::write_file(opt.out, detail::pretty(to_json(run_bench(cfg))));
  } catch (const std::exception& e) {
    err << "bench: " << e.what() << "\n";
    return kExitItemError;
  }
  return kExitOk;
}

// ------------------------------------------------------------------- pwa

struct PwaOptions {
  fs::path soft;
  fs::path out;
  PwaConfig pwa;
};

inline int cmd_pwa(const PwaOptions& opt, std::ostream& err) {
  try {
    for (const auto& w : opt.pwa.validate()) err << "pwa: warning: " << w << "\n";
  } catch (const ValidationError& e) {
    err << "pwa: " << e.what() << "\n";
    return kExitUsage;
  }
  if (opt.out.empty()) {
    err << "pwa: --out is required\n";
    return kExitUsage;
  }
  try {
    const auto weights = weight_map(detail::read_soft(opt.soft), opt.pwa);
    detail::write_file(opt.out, encode_smsk(to_smsk(weights)));
  } catch (const std::exception& e) {
    err << "pwa: " << e.what() << "\n";
    return kExitItemError;
  }
  return kExitOk;
}

// ----------------------------------------------------------------- train

struct TrainOptions {
  std::uint64_t seed = HarnessConfig{}.seed;
  std::size_t labeled = HarnessConfig{}.labeled;
  std::size_t unlabeled = HarnessConfig{}.unlabeled;
  std::size_t heldout = HarnessConfig{}.heldout;
  std::string strategy = "cpi-u";
  std::size_t steps = HarnessConfig::default_train().mutual_steps;
  std::size_t burn_in = HarnessConfig::default_train().burn_in_steps;
  double jitter = HarnessConfig::default_train().jitter;
  std::size_t workers = 1;
  fs::path out;
};

inline int cmd_train(const TrainOptions& opt, std::ostream& err) {
  HarnessConfig cfg;
  try {
    if (opt.labeled < 1) throw UsageError("--labeled must be >= 1");
    if (opt.heldout < 1) throw UsageError("--heldout must be >= 1");
    if (opt.out.empty()) throw UsageError("--out is required");
    cfg.seed = opt.seed;
    cfg.labeled = opt.labeled;
    cfg.unlabeled = opt.unlabeled;
    cfg.heldout = opt.heldout;
    cfg.train.match.strategy = parse_strategy(opt.strategy);
    cfg.train.mutual_steps = opt.steps;
    cfg.train.burn_in_steps = opt.burn_in;
    cfg.train.jitter = opt.jitter;
    cfg.train.workers = opt.workers;
    cfg.train.validate();
  } catch (const std::invalid_argument& e) {
    err << "train: " << e.what() << "\n";
    return kExitUsage;
  }
  try {
    detail::write_file(opt.out, detail::pretty(to_json(run_harness(cfg), cfg)));
  } catch (const std::exception& e) {
    err << "train: " << e.what() << "\n";
    return kExitItemError;
  }
  return kExitOk;
}

// ----------------------------------------------------------------- stats

struct StatsOptions {
  fs::path before;
  fs::path after;
  fs::path gt;
  fs::path report;  // optional refine report; its fallback entries count as no_correction
  fs::path out;
};

inline int cmd_stats(const StatsOptions& opt, std::ostream& err) {
  for (const auto* dir : {&opt.before, &opt.after, &opt.gt}) {
    if (!fs::is_directory(*dir)) {
      err << "stats: not a directory: " << *dir << "\n";
      return kExitUsage;
    }
  }
  if (opt.out.empty()) {
    err << "stats: --out is required\n";
    return kExitUsage;
  }
  try {
    const auto before = detail::list_by_stem(opt.before, ".json");
    const auto after = detail::list_by_stem(opt.after, ".json");
    const auto gt = detail::list_by_stem(opt.gt, ".json");
    auto keys = [](const auto& m) {
      std::vector<std::string> k;
      for (const auto& [id, p] : m) k.push_back(id);
      return k;
    };
    if (keys(before) != keys(gt) || keys(after) != keys(gt)) {
      throw ValidationError("image ids differ between --before, --after and --gt");
    }

    std::map<std::string, bool> fell_back;
    if (!opt.report.empty()) {
      const auto j = nlohmann::json::parse(detail::read_file(opt.report));
      for (const auto& e : j.at("entries")) {
        fell_back[e.at("image_id").get<std::string>()] = e.at("kind") == "fallback";
      }
    }

    CorrectionStats stats;
    nlohmann::json items = nlohmann::json::array();
    for (const auto& [id, gt_path] : gt) {
      const auto g = detail::read_rle_mask(gt_path);
      const auto b = detail::read_rle_mask(before.at(id));
      const auto a = detail::read_rle_mask(after.at(id));
      const auto fb = fell_back.find(id);
      const Correction c = (fb != fell_back.end() && fb->second) ? Correction::kNone
                                                                  : classify_correction(b, a, g);
      tally(stats, c);
      static constexpr const char* kNames[] = {"positive", "negative", "neutral", "no_correction"};
      items.push_back({{"image_id", id},
                       {"iou_before", iou(b, g).value()},
                       {"iou_after", iou(a, g).value()},
                       {"correction", kNames[static_cast<int>(c)]}});
    }
    nlohmann::json out = to_json(stats);
    out["items"] = items;
    detail::write_file(opt.out, detail::pretty(out));
  } catch (const std::exception& e) {
    err << "stats: " << e.what() << "\n";
    return kExitItemError;
  }
  return kExitOk;
}

}  // namespace maskrefine::cli

#endif  // MASKREFINE_TOOLS_COMMANDS_HPP
