// Copyright 2026 The qmetro Authors
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

#include <algorithm>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace qmetro::detail {

/// Multinomial draw by sequential conditional binomials. `probs` need not be
/// normalised.
inline std::vector<std::int64_t> sample_multinomial(std::int64_t trials, std::span<const double> probs,
                                                    std::mt19937_64& rng) {
  std::vector<std::int64_t> counts(probs.size(), 0);
  double remaining_mass = 0.0;
  std::size_t last = 0;
  for (std::size_t c = 0; c < probs.size(); ++c) {
    remaining_mass += probs[c];
    if (probs[c] > 0.0) last = c;
  }
  std::int64_t remaining = trials;
  for (std::size_t c = 0; c < probs.size() && remaining > 0; ++c) {
    if (c == last) {
      counts[c] = remaining;
      break;
    }
    const double q = remaining_mass > 0.0 ? std::clamp(probs[c] / remaining_mass, 0.0, 1.0) : 0.0;
    if (q > 0.0) {
      std::binomial_distribution<std::int64_t> draw(remaining, q);
      counts[c] = draw(rng);
    }
    remaining -= counts[c];
    remaining_mass -= probs[c];
  }
  return counts;
}

/// Independent stream for replicate `index` of a run seeded with `seed`.
inline std::mt19937_64 substream(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace qmetro::detail
