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

#include "permnm/model.hpp"

#include <set>

#include "permnm/error.hpp"

namespace permnm {

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::none: return "none";
    case Activation::relu: return "relu";
  }
  return "unknown";
}

Activation parse_activation(std::string_view text) {
  if (text == "none" || text.empty()) return Activation::none;
  if (text == "relu") return Activation::relu;
  fail(ErrorCode::manifest_error, "unknown activation '" + std::string(text) + "'");
}

template <class T>
void Model<T>::validate() const {
  require(!layers.empty(), ErrorCode::contract_violation, "model has no layers");
  std::set<std::string> names;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    require(!layer.weight.empty(), ErrorCode::shape_mismatch,
            "layer '" + layer.name + "' has no weight");
    require(names.insert(layer.name).second, ErrorCode::contract_violation,
            "duplicate layer name '" + layer.name + "'");
    const std::string expected = l == 0 ? std::string(kModelInput) : layers[l - 1].name;
    require(layer.input == expected, ErrorCode::contract_violation,
            "layer '" + layer.name + "' reads '" + layer.input + "', but only sequential stacks "
            "are supported (expected '" + expected + "')");
    if (l > 0) {
      require(layer.c_in() == layers[l - 1].c_out(), ErrorCode::shape_mismatch,
              "layer '" + layer.name + "' expects " + std::to_string(layer.c_in()) +
                  " inputs but '" + layers[l - 1].name + "' produces " +
                  std::to_string(layers[l - 1].c_out()));
    }
  }
}

template <class T>
std::size_t Model<T>::index_of(std::string_view name) const {
  for (std::size_t l = 0; l < layers.size(); ++l)
    if (layers[l].name == name) return l;
  fail(ErrorCode::contract_violation, "no layer named '" + std::string(name) + "'");
}

template <class T>
std::vector<Matrix<T>> Model<T>::forward_all(const Matrix<T>& x) const {
  require(x.cols() == input_dim(), ErrorCode::shape_mismatch,
          "model input has " + std::to_string(x.cols()) + " features, expected " +
              std::to_string(input_dim()));
  std::vector<Matrix<T>> acts{x};
  for (const auto& layer : layers) {
    Matrix<T> z = matmul_nt(acts.back(), layer.weight);
    apply_activation(z, layer.activation);
    acts.push_back(std::move(z));
  }
  return acts;
}

template <class T>
Matrix<T> Model<T>::forward(const Matrix<T>& x) const {
  return forward_all(x).back();
}

template <class T>
void apply_activation(Matrix<T>& z, Activation a) {
  if (a == Activation::relu)
    for (T& v : z.data()) v = v > T{0} ? v : T{0};
}

template <class T>
void activation_pullback(Matrix<T>& g, const Matrix<T>& pre, Activation a) {
  if (a == Activation::relu)
    for (std::size_t i = 0; i < g.size(); ++i)
      if (!(pre.data()[i] > T{0})) g.data()[i] = T{0};
}

template struct Model<float>;
template struct Model<double>;
template void apply_activation(Matrix<float>&, Activation);
template void apply_activation(Matrix<double>&, Activation);
template void activation_pullback(Matrix<float>&, const Matrix<float>&, Activation);
template void activation_pullback(Matrix<double>&, const Matrix<double>&, Activation);

}  // namespace permnm
