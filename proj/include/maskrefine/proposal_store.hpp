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

// Offline library of multi-scale candidate masks, one ProposalSet per image.
//
// On-disk format is UTF-8 JSONL, one image per line, sorted by image_id:
//
//   {"image_id": "img0", "w": 4, "h": 4, "proposals": [{"counts": [...]}, ...]}
//
// Proposals inherit w/h from their line. The order of "proposals" is the
// canonical scan order used by the refiner, so it survives save/load
// unchanged.

#ifndef MASKREFINE_PROPOSAL_STORE_HPP
#define MASKREFINE_PROPOSAL_STORE_HPP

#include <cstddef>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "maskrefine/error.hpp"
#include "maskrefine/rle.hpp"

namespace maskrefine {

struct ProposalSet {
  std::string image_id;
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<RleMask> proposals;

  std::size_t size() const noexcept { return proposals.size(); }

  friend bool operator==(const ProposalSet&, const ProposalSet&) = default;
};

using ProposalLibrary = std::map<std::string, ProposalSet>;

struct Violation {
  std::size_t index;  // proposal index k
  std::string rule;

  friend bool operator==(const Violation&, const Violation&) = default;
};

/// Returns one entry per broken invariant. An empty proposal list is legal.
inline std::vector<Violation> validate(const ProposalSet& set) {
  std::vector<Violation> out;
  for (std::size_t k = 0; k < set.proposals.size(); ++k) {
    const auto& p = set.proposals[k];
    if (p.width != set.width || p.height != set.height) {
      out.push_back({k, "dimension"});
      continue;
    }
    try {
      check_rle(p);
    } catch (const FormatError&) {
      out.push_back({k, "counts"});
      continue;
    }
    if (rle_area(p) == 0) out.push_back({k, "zero_area"});
  }
  return out;
}

inline nlohmann::json to_json(const ProposalSet& set) {
  nlohmann::json j;
  j["image_id"] = set.image_id;
  j["w"] = set.width;
  j["h"] = set.height;
  j["proposals"] = nlohmann::json::array();
  for (const auto& p : set.proposals) {
    j["proposals"].push_back({{"counts", p.counts}});
  }
  return j;
}

inline ProposalSet proposal_set_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw FormatError("proposal line: expected a JSON object");
  for (const char* key : {"image_id", "w", "h", "proposals"}) {
    if (!j.contains(key)) throw FormatError(std::string("proposal line: missing \"") + key + "\"");
  }
  if (!j.at("image_id").is_string()) throw FormatError("proposal line: image_id must be a string");
  if (!j.at("proposals").is_array()) throw FormatError("proposal line: proposals must be an array");

  ProposalSet set;
  set.image_id = j.at("image_id").get<std::string>();
  set.width = detail::json_u32(j.at("w"), "w");
  set.height = detail::json_u32(j.at("h"), "h");
  for (const auto& pj : j.at("proposals")) {
    if (!pj.is_object() || !pj.contains("counts")) {
      throw FormatError("proposal line: each proposal needs \"counts\"");
    }
    set.proposals.push_back({set.width, set.height, detail::json_counts(pj.at("counts"))});
  }
  return set;
}

inline void save_library(const ProposalLibrary& lib, std::ostream& sink) {
  for (const auto& [id, set] : lib) {
    sink << to_json(set).dump() << '\n';
  }
  if (!sink) throw std::runtime_error("save_library: write failed");
}

/// Parses and validates a JSONL library. Blank lines are ignored.
inline ProposalLibrary load_library(std::istream& source) {
  ProposalLibrary lib;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(source, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError("line " + std::to_string(lineno) + ": " + e.what());
    }
    ProposalSet set;
    try {
      set = proposal_set_from_json(j);
    } catch (const FormatError& e) {
      throw FormatError("line " + std::to_string(lineno) + ": " + e.what());
    }
    if (set.width == 0 || set.height == 0) {
      throw ValidationError("line " + std::to_string(lineno) + ": zero width or height");
    }
    for (const auto& v : validate(set)) {
      if (v.rule == "counts") {
        throw FormatError("line " + std::to_string(lineno) + ": proposal " +
                          std::to_string(v.index) + " has invalid counts");
      }
      throw ValidationError("line " + std::to_string(lineno) + ": proposal " +
                            std::to_string(v.index) + " violates " + v.rule);
    }
    auto id = set.image_id;
    if (!lib.emplace(id, std::move(set)).second) {
      throw ValidationError("line " + std::to_string(lineno) + ": duplicate image_id \"" + id + "\"");
    }
  }
  if (source.bad()) throw std::runtime_error("load_library: read failed");
  return lib;
}

}  // namespace maskrefine

#endif  // MASKREFINE_PROPOSAL_STORE_HPP
