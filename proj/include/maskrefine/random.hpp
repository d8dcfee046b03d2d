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

// splitmix64 and the handful of distributions the benchmark needs.
//
// The <random> distributions are implementation-defined, so they would make
// benchmark reports differ between standard libraries. Everything here is
// specified down to the bit.

#ifndef MASKREFINE_RANDOM_HPP
#define MASKREFINE_RANDOM_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace maskrefine {

class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  constexpr result_type operator()() noexcept {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [lo, hi] (inclusive), unbiased via rejection.
  std::uint64_t uniform_int(std::uint64_t lo, std::uint64_t hi) noexcept {
    const std::uint64_t span = hi - lo;
    if (span == max()) return (*this)();
    const std::uint64_t range = span + 1;
    const std::uint64_t limit = max() - max() % range;
    std::uint64_t x;
    do {
      x = (*this)();
    } while (x >= limit);
    return lo + x % range;
  }

  /// Standard normal via Box-Muller; one variate per call, no caching.
  double normal() noexcept {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mean, double stddev) noexcept { return mean + stddev * normal(); }

  /// Derives an independent child seed; stream `i` of a parent seed.
  static constexpr std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) noexcept {
    SplitMix64 g(seed ^ (0xd1b54a32d192ed03ULL * (stream + 1)));
    g();
    return g();
  }

 private:
  std::uint64_t state_;
};

}  // namespace maskrefine

#endif  // MASKREFINE_RANDOM_HPP
