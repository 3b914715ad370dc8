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

#include "permnm/adamw.hpp"

#include <cmath>
#include <string>

#include "permnm/error.hpp"

namespace permnm {

template <class T>
AdamWState<T> AdamWState<T>::zeros_like(const std::vector<Matrix<T>>& params) {
  AdamWState state;
  for (const auto& p : params) {
    state.m.emplace_back(p.rows(), p.cols());
    state.v.emplace_back(p.rows(), p.cols());
  }
  return state;
}

template <class T>
void adamw_step(std::vector<Matrix<T>>& params, const std::vector<Matrix<T>>& grads,
                AdamWState<T>& state, const AdamWConfig& config) {
  require(config.learning_rate > 0.0, ErrorCode::contract_violation,
          "adamw: learning rate must be positive");
  require(params.size() == grads.size() && params.size() == state.m.size() &&
              params.size() == state.v.size(),
          ErrorCode::shape_mismatch, "adamw: parameter, gradient and state counts differ");
  for (std::size_t b = 0; b < params.size(); ++b) {
    require(params[b].same_shape(grads[b]) && params[b].same_shape(state.m[b]) &&
                params[b].same_shape(state.v[b]),
            ErrorCode::shape_mismatch,
            "adamw: shape mismatch in parameter block " + std::to_string(b));
    require(grads[b].all_finite(), ErrorCode::non_finite,
            "adamw: non-finite gradient in parameter block " + std::to_string(b));
  }

  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(config.beta1, t);
  const double bias2 = 1.0 - std::pow(config.beta2, t);
  const double lr = config.learning_rate;
  const double decay = 1.0 - lr * config.weight_decay;

  for (std::size_t b = 0; b < params.size(); ++b) {
    auto p = params[b].data();
    auto g = grads[b].data();
    auto m = state.m[b].data();
    auto v = state.v[b].data();
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g[i];
      const double mi = config.beta1 * m[i] + (1.0 - config.beta1) * gi;
      const double vi = config.beta2 * v[i] + (1.0 - config.beta2) * gi * gi;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double m_hat = mi / bias1;
      const double v_hat = vi / bias2;
      const double updated = p[i] * decay - lr * m_hat / (std::sqrt(v_hat) + config.eps);
      p[i] = static_cast<T>(updated);
    }
  }
}

template struct AdamWState<float>;
template struct AdamWState<double>;
template void adamw_step(std::vector<Matrix<float>>&, const std::vector<Matrix<float>>&,
                         AdamWState<float>&, const AdamWConfig&);
template void adamw_step(std::vector<Matrix<double>>&, const std::vector<Matrix<double>>&,
                         AdamWState<double>&, const AdamWConfig&);

}  // namespace permnm
