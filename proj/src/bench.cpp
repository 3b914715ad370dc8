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

#include "permnm/bench.hpp"

#include <algorithm>
#include <chrono>
#include <vector>

#include "permnm/assignment.hpp"
#include "permnm/error.hpp"
#include "permnm/rng.hpp"

namespace permnm {

namespace {

template <class F>
double median_seconds(std::size_t iterations, F&& body) {
  std::vector<double> samples;
  for (std::size_t i = 0; i < iterations; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    body();
    samples.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  std::sort(samples.begin(), samples.end());
  const std::size_t mid = samples.size() / 2;
  return samples.size() % 2 ? samples[mid] : 0.5 * (samples[mid - 1] + samples[mid]);
}

}  // namespace

PermutationBench bench_permutation(std::size_t n, std::size_t iterations, std::size_t rows,
                                   unsigned long long seed) {
  require(n >= 2, ErrorCode::contract_violation, "bench: n must be at least 2");
  require(iterations >= 1 && rows >= 1, ErrorCode::contract_violation,
          "bench: iterations and rows must be positive");
  Rng rng(seed);
  const auto w = rng.normal_matrix<float>(rows, n);
  const auto perm = rng.permutation(n);
  const auto dense = dense_permutation<float>(perm);

  Matrix<float> gathered;
  Matrix<float> multiplied;
  PermutationBench out{n, rows, iterations, 0, 0, 0};
  out.gather_seconds = median_seconds(iterations, [&] { gathered = gather_columns(w, perm); });
  out.matmul_seconds = median_seconds(iterations, [&] { multiplied = matmul(w, dense); });
  require(gathered == multiplied, ErrorCode::contract_violation,
          "bench: gather and dense permutation disagree");
  out.ratio = out.matmul_seconds / std::max(out.gather_seconds, 1e-12);
  return out;
}

}  // namespace permnm
