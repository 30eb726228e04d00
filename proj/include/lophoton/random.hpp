/**
 * Copyright 2026 The lophoton Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace lophoton {

inline constexpr std::uint64_t default_seed = 20240517;

// SplitMix64 finalizer. Stream k of a master seed s is seeded with
// splitmix64(s + (k + 1) * 0x9E3779B97F4A7C15), so every Monte Carlo
// replicate has its own generator regardless of thread scheduling.
constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) noexcept {
    return splitmix64(master + (stream + 1) * 0x9E3779B97F4A7C15ULL);
}

using Rng = std::mt19937_64;

inline std::int64_t poisson_draw(Rng& rng, double mean) {
    if (mean <= 0.0) return 0;
    std::poisson_distribution<std::int64_t> d(mean);
    return d(rng);
}

}  // namespace lophoton
