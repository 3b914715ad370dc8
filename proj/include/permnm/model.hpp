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

#include <string>
#include <string_view>
#include <vector>

#include "permnm/matrix.hpp"

namespace permnm {

enum class Activation { none, relu };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view text);

inline constexpr std::string_view kModelInput = "input";

// A linear layer y = x * W^T followed by an elementwise activation.
// Elementwise activations commute with channel permutations, which is what
// lets a layer's input permutation be folded into its predecessor's rows.
template <class T>
struct Layer {
  std::string name;
  Matrix<T> weight;  // C_out x C_in
  std::string input = std::string(kModelInput);  // predecessor name or "input"
  Activation activation = Activation::none;

  std::size_t c_out() const noexcept { return weight.rows(); }
  std::size_t c_in() const noexcept { return weight.cols(); }
};

// Sequential stack: layer 0 reads the model input, layer l reads layer l-1.
template <class T>
struct Model {
  std::vector<Layer<T>> layers;

  // Throws shape_mismatch / contract_violation when names repeat, links do
  // not form the chain, or adjacent dimensions do not compose.
  void validate() const;
  std::size_t input_dim() const { return layers.front().c_in(); }
  std::size_t index_of(std::string_view name) const;

  // inputs[l] is what layer l sees; inputs.back() is the model output.
  std::vector<Matrix<T>> forward_all(const Matrix<T>& x) const;
  Matrix<T> forward(const Matrix<T>& x) const;

  template <class U>
  Model<U> cast() const {
    Model<U> out;
    for (const auto& l : layers)
      out.layers.push_back({l.name, l.weight.template cast<U>(), l.input, l.activation});
    return out;
  }
};

template <class T>
void apply_activation(Matrix<T>& z, Activation a);
// In place: g *= activation'(pre), evaluated at the pre-activation values.
template <class T>
void activation_pullback(Matrix<T>& g, const Matrix<T>& pre, Activation a);

}  // namespace permnm
