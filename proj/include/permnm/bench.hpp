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

#include <cstddef>

namespace permnm {

struct PermutationBench {
  std::size_t n = 0;
  std::size_t rows = 0;
  std::size_t iterations = 0;
  double gather_seconds = 0;  // median
  double matmul_seconds = 0;  // median
  double ratio = 0;           // matmul / gather
};

// Times permuting the columns of a rows x n f32 matrix two ways: index
// gather, and multiplication by the dense n x n permutation matrix. Medians
// over `iterations` runs.
PermutationBench bench_permutation(std::size_t n, std::size_t iterations, std::size_t rows = 64,
                                   unsigned long long seed = 0);

}  // namespace permnm
