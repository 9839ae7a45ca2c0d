// Copyright 2026 The Ascend Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Hierarchical seeding. Every random decision draws from a generator keyed by
// (seed, stream, counter), so a decision depends only on its position in the
// experiment and never on how many draws happened elsewhere. That is what
// makes replay and parallel evaluation reproduce a live run exactly.

#include <cstdint>
#include <random>

namespace ascend {

using Rng = std::mt19937_64;

enum class Stream : std::uint64_t {
  kInitialize = 1,
  kBreed = 2,
  kAssign = 3,
  kUser = 4,
  kModel = 5,
};

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, Stream stream, std::uint64_t counter) {
  return splitmix64(splitmix64(splitmix64(seed) ^ static_cast<std::uint64_t>(stream)) ^ counter);
}

inline Rng make_rng(std::uint64_t seed, Stream stream, std::uint64_t counter) {
  return Rng(derive_seed(seed, stream, counter));
}

/// Uniform double in [0, 1) from 53 high bits, independent of libstdc++'s
/// generate_canonical.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, n). Rejection sampling, n > 0.
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t n) {
  // 2^64 mod n; discarding draws below it leaves a multiple of n outcomes.
  const std::uint64_t threshold = (0 - n) % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x < threshold);
  return x % n;
}

}  // namespace ascend
