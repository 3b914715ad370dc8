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

#include <filesystem>
#include <string>
#include <vector>

#include "permnm/model.hpp"
#include "permnm/nm_codec.hpp"
#include "permnm/permlearn.hpp"

namespace permnm {

struct SidecarEntry {
  std::string layer;
  std::vector<std::size_t> block_boundaries;
  PermutationIndices perm;
  // Set on the first layer only: its inputs must be gathered by perm at
  // inference because no predecessor absorbs the reordering.
  bool first_layer_input_gather = false;
};

// Layer l of the folded model stores M* .* (W_l P_l) with its rows reordered
// by P_{l+1}, so layer l emits activations already in layer l+1's permuted
// channel order. Only the model input needs an explicit gather.
template <class T>
struct FoldedModel {
  Model<T> model;  // weights in stored (permuted) order
  PermutationIndices input_gather;
  std::vector<SidecarEntry> sidecar;
  std::vector<CompressedNM> compressed;  // one per layer, f32
};

template <class T>
FoldedModel<T> fold_and_export(const Model<T>& model,
                               const std::vector<PermutationSolution<T>>& solutions,
                               const NMConfig& nm);

// Inference with the folded weights: gather the input, then plain layers.
template <class T>
Matrix<T> folded_forward(const FoldedModel<T>& folded, const Matrix<T>& x);

// The training-time sparse model: each layer applies its effective weight
// (M .* (W P)) P^T to unpermuted activations.
template <class T>
Matrix<T> sparse_forward(const Model<T>& model,
                         const std::vector<PermutationSolution<T>>& solutions,
                         const Matrix<T>& x);

// {"format": "permnm-permutations", "version": 1, "layers": {name: {...}}}
std::string sidecar_json(const std::vector<SidecarEntry>& sidecar);
std::vector<SidecarEntry> parse_sidecar_json(const std::string& text);

}  // namespace permnm
