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

#include <cstdint>
#include <vector>

#include "permnm/matrix.hpp"

namespace permnm {

struct AdamWConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Permutation logits are not decayed: shrinking them toward zero flattens
  // the soft permutation and fights hardening.
  double weight_decay = 0.0;
};

template <class T>
struct AdamWState {
  std::vector<Matrix<T>> m;
  std::vector<Matrix<T>> v;
  std::uint64_t step = 0;

  // Zeroed moment buffers shaped like params.
  static AdamWState zeros_like(const std::vector<Matrix<T>>& params);
};

// One decoupled-weight-decay Adam update over a set of parameter blocks.
// Throws non_finite naming the first block whose gradient has a NaN/Inf; in
// that case params and state are left untouched.
template <class T>
void adamw_step(std::vector<Matrix<T>>& params, const std::vector<Matrix<T>>& grads,
                AdamWState<T>& state, const AdamWConfig& config);

}  // namespace permnm
