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
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "permnm/adamw.hpp"
#include "permnm/matrix.hpp"
#include "permnm/model.hpp"
#include "permnm/permutation.hpp"
#include "permnm/rng.hpp"
#include "permnm/sinkhorn.hpp"
#include "permnm/sparsity.hpp"

namespace permnm {

// Contiguous channel blocks; boundaries = {0, b1, ..., c_in}.
struct BlockLayout {
  std::vector<std::size_t> boundaries;

  // Blocks of `block_size`, the last one ragged when block_size does not
  // divide c_in.
  static BlockLayout uniform(std::size_t c_in, std::size_t block_size);

  std::size_t block_count() const noexcept { return boundaries.size() - 1; }
  std::size_t begin(std::size_t b) const { return boundaries.at(b); }
  std::size_t end(std::size_t b) const { return boundaries.at(b + 1); }
  std::size_t size(std::size_t b) const { return end(b) - begin(b); }
  std::size_t c_in() const { return boundaries.back(); }

  // Every block must be a whole number of N:M groups.
  void validate(const NMConfig& nm) const;

  friend bool operator==(const BlockLayout&, const BlockLayout&) = default;
};

// Learnable logits W_P^i, one square matrix per block.
template <class T>
struct BlockPermutationParams {
  BlockLayout layout;
  std::vector<Matrix<T>> blocks;

  std::size_t parameter_count() const;
};

// Each block starts as N(0, stddev^2) noise.
template <class T>
BlockPermutationParams<T> init_params(std::size_t c_in, std::size_t block_size, Rng& rng,
                                      double stddev = 0.01);

// Global permutation from per-block local permutations.
PermutationIndices assemble_block_permutation(const BlockLayout& layout,
                                              const std::vector<PermutationIndices>& blocks);
std::vector<PermutationIndices> split_block_permutation(const BlockLayout& layout,
                                                        const PermutationIndices& perm);
bool respects_blocks(const PermutationIndices& perm, const BlockLayout& layout);

// ---- losses -----------------------------------------------------------------

// Mean over rows of 1 - cos(y_r, y_tilde_r). Rows where y is zero are left
// out of the mean; rows where y_tilde is zero contribute 1.
template <class T>
T loss_cosine(const Matrix<T>& y, const Matrix<T>& y_tilde);
// d loss_cosine / d y_tilde.
template <class T>
Matrix<T> loss_cosine_grad(const Matrix<T>& y, const Matrix<T>& y_tilde);
// Mean squared error over all entries.
template <class T>
T loss_mse(const Matrix<T>& y, const Matrix<T>& y_tilde);

// ---- one layer ----------------------------------------------------------------

// Everything needed to score permutations of one layer: its weight, the dense
// model's activations entering it, the dense output and precomputed scores.
template <class T>
struct LayerProblem {
  Matrix<T> weight;   // C_out x C_in
  Matrix<T> inputs;   // samples x C_in
  Matrix<T> target;   // samples x C_out, inputs * weight^T
  ImportanceScores<T> scores;
  NMConfig nm;
  BlockLayout layout;

  static LayerProblem make(Matrix<T> weight, Matrix<T> inputs, ImportanceMetric metric,
                           const NMConfig& nm, const BlockLayout& layout);
};

// The pruned weight mapped back to the original channel order:
// (mask .* (W P)) P^T, so it can be applied to unpermuted inputs.
template <class T>
Matrix<T> effective_weight(const Matrix<T>& weight, const PermutationIndices& perm,
                           const SparsityMask<T>& permuted_mask);

template <class T>
struct HardEvaluation {
  PermutationIndices perm;
  SparsityMask<T> mask;  // in permuted column order
  Matrix<T> y_tilde;
  T loss = T{0};
  T retained = T{0};
};

// Hard permutation + hard N:M mask from the permuted scores, then the cosine
// loss of the pruned layer against the dense output.
template <class T>
HardEvaluation<T> evaluate_permutation(const LayerProblem<T>& problem,
                                       const PermutationIndices& perm);

template <class T>
struct SparseForward {
  Matrix<T> y_tilde;
  PermutationIndices perm;
  SparsityMask<T> mask;
  Matrix<T> effective_weight;
};

// Straight evaluation of the training-time forward: soft permutation per
// block, hardened by assignment, permuted scores, hard mask, masked product.
template <class T>
SparseForward<T> forward_sparse(const Matrix<T>& w, const Matrix<T>& x,
                                const BlockPermutationParams<T>& params, T tau,
                                std::size_t sinkhorn_iters, const NMConfig& nm,
                                const ImportanceScores<T>& scores);

// ---- training -------------------------------------------------------------

enum class TrainMode { layerwise, endtoend, automatic };

std::string_view to_string(TrainMode mode);
TrainMode parse_mode(std::string_view text);

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t steps = 50;
  std::size_t sinkhorn_iters = 5;
  double tau_start = 1.0;
  double tau_end = 0.1;
  std::size_t block_size = 64;
  ImportanceMetric metric = ImportanceMetric::wanda;
  // automatic resolves to endtoend for models with at most
  // kAutomaticEndToEndLimit weights and layerwise otherwise.
  TrainMode mode = TrainMode::automatic;
  std::uint64_t seed = 0;
  // Layers that learn permutations; the rest get the heuristic permutation.
  std::optional<std::vector<std::string>> partial_layers;
  // Let gradient flow into P through the permuted scores as well as through
  // the permuted weight.
  bool score_path_gradient = true;
  double init_stddev = 0.01;
  // Scale of Gumbel noise added to the logits each step; 0 disables it.
  double gumbel_noise = 0.0;
  AdamWConfig optimizer() const;
  TemperatureSchedule schedule() const;
  void validate() const;
};

inline constexpr std::size_t kAutomaticEndToEndLimit = 1u << 16;

TrainMode resolve_mode(TrainMode mode, std::size_t total_weights);

template <class T>
struct PermutationSolution {
  std::string layer;
  BlockLayout layout;
  PermutationIndices perm;
  SparsityMask<T> mask;  // permuted column order
  T achieved_loss = T{0};
  T retained_score = T{0};
  T identity_loss = T{0};
  T identity_retained = T{0};
  T heuristic_cp_loss = T{0};
  T heuristic_cp_retained = T{0};
  bool learned = true;
  // Step whose hardened permutation is kept; nullopt if the seeded baseline won.
  std::optional<std::size_t> best_step;
  std::vector<T> loss_history;
};

template <class T>
struct TrainResult {
  TrainMode mode = TrainMode::layerwise;
  std::vector<PermutationSolution<T>> layers;
  // Final-output cosine loss of the whole sparse model, per method.
  T model_loss = T{0};
  T model_identity_loss = T{0};
  T model_heuristic_loss = T{0};
  bool diverged = false;
  std::string diagnostic;
};

// Learns a block permutation for one layer against its dense output. The
// identity permutation is evaluated first and seeds the best-so-far
// solution, so achieved_loss <= identity_loss always holds.
template <class T>
PermutationSolution<T> train_layer(const LayerProblem<T>& problem, const TrainConfig& config,
                                   Rng& rng, std::string* diagnostic = nullptr);

template <class T>
TrainResult<T> train(const Model<T>& model, const Matrix<T>& calibration,
                     const TrainConfig& config, const NMConfig& nm);

// Per-layer block layout used by train(): block_size clamped to C_in.
BlockLayout layer_layout(std::size_t c_in, const TrainConfig& config, const NMConfig& nm);

}  // namespace permnm
