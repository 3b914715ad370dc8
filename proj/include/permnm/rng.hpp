/* Copyright (c) 2026 The permnm Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License. */

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "permnm/matrix.hpp"
#include "permnm/permutation.hpp"

namespace permnm {

// xoshiro256** seeded through splitmix64. The raw 64-bit stream and the
// uniform/shuffle helpers are bit-identical on every platform; normal() uses
// the Marsaglia polar method and so inherits the platform's std::log.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64();
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  // Uniform integer in [0, bound) without modulo bias.
  std::uint64_t below(std::uint64_t bound);
  double normal();
  // Standard Gumbel(0, 1) draw.
  double gumbel();

  // Fisher-Yates, independent of the standard library's shuffle.
  template <class It>
  void shuffle(It first, It last) {
    const auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
      const auto j = below(i);
      std::swap(first[i - 1], first[j]);
    }
  }

  PermutationIndices permutation(std::size_t n);

  template <class T>
  Matrix<T> normal_matrix(std::size_t rows, std::size_t cols, double stddev = 1.0);

  // Independent child stream, e.g. one per layer or per trial.
  Rng split(std::uint64_t stream);

 private:
  std::uint64_t seed_;
  std::array<std::uint64_t, 4> s_{};
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace permnm
