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

#include "permnm/fold.hpp"

#include <json.hpp>

#include "permnm/error.hpp"

namespace permnm {

template <class T>
FoldedModel<T> fold_and_export(const Model<T>& model,
                               const std::vector<PermutationSolution<T>>& solutions,
                               const NMConfig& nm) {
  model.validate();
  nm.validate();
  require(solutions.size() == model.layers.size(), ErrorCode::shape_mismatch,
          "fold: " + std::to_string(solutions.size()) + " solutions for " +
              std::to_string(model.layers.size()) + " layers");

  FoldedModel<T> folded;
  const std::size_t count = model.layers.size();
  for (std::size_t l = 0; l < count; ++l) {
    const auto& layer = model.layers[l];
    const auto& s = solutions[l];
    require(s.perm.size() == layer.c_in() && s.mask.mask.same_shape(layer.weight),
            ErrorCode::shape_mismatch, "fold: solution for '" + layer.name + "' has the wrong shape");
    require(respects_blocks(s.perm, s.layout), ErrorCode::contract_violation,
            "fold: permutation of '" + layer.name + "' crosses block boundaries");
    if (auto v = find_mask_violation(s.mask, nm)) {
      fail(ErrorCode::contract_violation, "fold: mask of '" + layer.name + "' violates " +
                                              nm.to_string() + " at row " + std::to_string(v->row) +
                                              ", group " + std::to_string(v->group));
    }
    Matrix<T> stored = apply_mask(s.mask, gather_columns(layer.weight, s.perm));
    if (l + 1 < count) {
      const auto& next = solutions[l + 1].perm;
      require(next.size() == stored.rows(), ErrorCode::shape_mismatch,
              "fold: '" + layer.name + "' has " + std::to_string(stored.rows()) +
                  " outputs but the next permutation covers " + std::to_string(next.size()));
      stored = gather_rows(stored, next);
    }
    folded.compressed.push_back(compress_nm(stored.template cast<float>(), nm));
    folded.model.layers.push_back({layer.name, std::move(stored), layer.input, layer.activation});
    folded.sidecar.push_back({layer.name, s.layout.boundaries, s.perm, l == 0});
  }
  folded.input_gather = solutions.front().perm;
  return folded;
}

template <class T>
Matrix<T> folded_forward(const FoldedModel<T>& folded, const Matrix<T>& x) {
  Matrix<T> h = gather_columns(x, folded.input_gather);
  for (const auto& layer : folded.model.layers) {
    h = matmul_nt(h, layer.weight);
    apply_activation(h, layer.activation);
  }
  return h;
}

template <class T>
Matrix<T> sparse_forward(const Model<T>& model,
                         const std::vector<PermutationSolution<T>>& solutions,
                         const Matrix<T>& x) {
  require(solutions.size() == model.layers.size(), ErrorCode::shape_mismatch,
          "sparse_forward: one solution per layer is required");
  Matrix<T> h = x;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    h = matmul_nt(h, effective_weight(model.layers[l].weight, solutions[l].perm, solutions[l].mask));
    apply_activation(h, model.layers[l].activation);
  }
  return h;
}

std::string sidecar_json(const std::vector<SidecarEntry>& sidecar) {
  nlohmann::ordered_json layers = nlohmann::ordered_json::object();
  for (const auto& e : sidecar) {
    layers[e.layer] = {{"block_boundaries", e.block_boundaries},
                       {"perm", std::vector<std::size_t>(e.perm.indices().begin(), e.perm.indices().end())},
                       {"first_layer_input_gather", e.first_layer_input_gather}};
  }
  nlohmann::ordered_json doc = {
      {"format", "permnm-permutations"}, {"version", 1}, {"layers", std::move(layers)}};
  return doc.dump(2) + "\n";
}

std::vector<SidecarEntry> parse_sidecar_json(const std::string& text) {
  std::vector<SidecarEntry> out;
  try {
    const auto doc = nlohmann::ordered_json::parse(text);
    require(doc.at("format") == "permnm-permutations", ErrorCode::manifest_error,
            "sidecar: unexpected format tag");
    for (const auto& [name, e] : doc.at("layers").items()) {
      out.push_back({name, e.at("block_boundaries").get<std::vector<std::size_t>>(),
                     PermutationIndices(e.at("perm").get<std::vector<std::size_t>>()),
                     e.at("first_layer_input_gather").get<bool>()});
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::manifest_error, std::string("sidecar: ") + e.what());
  }
  return out;
}

#define PERMNM_INSTANTIATE(T)                                                                 \
  template FoldedModel<T> fold_and_export(const Model<T>&,                                    \
                                          const std::vector<PermutationSolution<T>>&,         \
                                          const NMConfig&);                                   \
  template Matrix<T> folded_forward(const FoldedModel<T>&, const Matrix<T>&);                 \
  template Matrix<T> sparse_forward(const Model<T>&,                                          \
                                    const std::vector<PermutationSolution<T>>&, const Matrix<T>&);

PERMNM_INSTANTIATE(float)
PERMNM_INSTANTIATE(double)

#undef PERMNM_INSTANTIATE

}  // namespace permnm
