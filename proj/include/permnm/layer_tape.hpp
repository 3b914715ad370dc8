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

// Stages of the per-layer permutation-learning pipeline and the tape that
// strings them together:
//
//   W_P blocks -> scale(1/tau) -> exp -> L x (row norm -> column norm)
//     -> harden [straight-through]         (soft surrogate: skipped)
//     -> score permute   S_hat = S P
//     -> hard mask [softmax surrogate]     (soft surrogate: group softmax)
//     -> effective weight (M .* (W P)) P^T
//     -> apply to inputs -> cosine loss    (layer mode only)
//
// Bundles carry one matrix per block; the score, mask and weight stages
// append or consume one trailing matrix.

#include <cstddef>
#include <vector>

#include "permnm/graddiff.hpp"
#include "permnm/permlearn.hpp"

namespace permnm {

template <class T>
class HardenStage final : public Stage<T> {
 public:
  explicit HardenStage(BlockLayout layout);
  StageKind kind() const noexcept override { return StageKind::straight_through; }
  std::optional<std::string> check_input(const Values<T>& in) const override;
  Values<T> forward(const Values<T>& in) override;
  Values<T> pullback(const Values<T>& out_adjoint) override;

  // Global permutation hardened by the last forward.
  const PermutationIndices& permutation() const noexcept { return perm_; }

 private:
  BlockLayout layout_;
  PermutationIndices perm_;
};

template <class T>
class ScorePermuteStage final : public Stage<T> {
 public:
  ScorePermuteStage(ImportanceScores<T> scores, BlockLayout layout, bool propagate);
  std::optional<std::string> check_input(const Values<T>& in) const override;
  Values<T> forward(const Values<T>& in) override;
  Values<T> pullback(const Values<T>& out_adjoint) override;

 private:
  ImportanceScores<T> scores_;
  BlockLayout layout_;
  bool propagate_;
};

// Forward: hard top-(M-N) mask of the permuted scores. Backward: the
// per-group softmax Jacobian at the permuted scores.
template <class T>
class HardMaskStage final : public Stage<T> {
 public:
  explicit HardMaskStage(NMConfig nm);
  StageKind kind() const noexcept override { return StageKind::surrogate_gradient; }
  Values<T> forward(const Values<T>& in) override;
  Values<T> pullback(const Values<T>& out_adjoint) override;

  const SparsityMask<T>& mask() const noexcept { return mask_; }

 private:
  NMConfig nm_;
  Matrix<T> soft_;
  SparsityMask<T> mask_;
};

// Fully differentiable stand-in for HardMaskStage: the per-group softmax.
template <class T>
class SoftMaskStage final : public Stage<T> {
 public:
  explicit SoftMaskStage(NMConfig nm);
  Values<T> forward(const Values<T>& in) override;
  Values<T> pullback(const Values<T>& out_adjoint) override;

 private:
  NMConfig nm_;
  Matrix<T> soft_;
};

template <class T>
class EffectiveWeightStage final : public Stage<T> {
 public:
  EffectiveWeightStage(Matrix<T> weight, BlockLayout layout);
  std::optional<std::string> check_input(const Values<T>& in) const override;
  Values<T> forward(const Values<T>& in) override;
  Values<T> pullback(const Values<T>& out_adjoint) override;

 private:
  Matrix<T> weight_;
  BlockLayout layout_;
  Values<T> perms_;
  Matrix<T> mask_;
  std::vector<Matrix<T>> permuted_weight_;  // W[:, block] P_b
};

// W_eff -> inputs * W_eff^T.
template <class T>
class ApplyInputStage final : public Stage<T> {
 public:
  explicit ApplyInputStage(Matrix<T> inputs);
  std::optional<std::string> check_input(const Values<T>& in) const override;
  Values<T> forward(const Values<T>& in) override;
  Values<T> pullback(const Values<T>& out_adjoint) override;

 private:
  Matrix<T> inputs_;
};

template <class T>
class CosineLossStage final : public Stage<T> {
 public:
  explicit CosineLossStage(Matrix<T> target);
  std::optional<std::string> check_input(const Values<T>& in) const override;
  Values<T> forward(const Values<T>& in) override;
  Values<T> pullback(const Values<T>& out_adjoint) override;

 private:
  Matrix<T> target_;
  Matrix<T> y_tilde_;
};

struct PipelineOptions {
  // Replace the hard permutation and hard mask by P_hat and the group softmax
  // (what the straight-through estimators pretend the forward is).
  bool soft_surrogate = false;
  bool score_path_gradient = true;
  std::size_t sinkhorn_iters = 5;
};

// Per-layer tape. Rebuilt on every forward because tau changes per step.
template <class T>
class LayerTape {
 public:
  LayerTape(const LayerProblem<T>& problem, PipelineOptions options);

  struct Output {
    T loss = T{0};
    Matrix<T> effective_weight;
    // Hard path only.
    PermutationIndices perm;
    SparsityMask<T> mask;
  };

  // Through the cosine loss against problem.target.
  Output forward(const std::vector<Matrix<T>>& blocks, T tau, const Values<T>& noise = {});
  // Gradient of the loss w.r.t. the W_P blocks.
  std::vector<Matrix<T>> backward();

  // Stops at the effective weight (for whole-model losses).
  Output forward_weight(const std::vector<Matrix<T>>& blocks, T tau, const Values<T>& noise = {});
  std::vector<Matrix<T>> backward_weight(const Matrix<T>& effective_weight_adjoint);

  Tape<T>& tape() noexcept { return tape_; }

 private:
  Output run(const std::vector<Matrix<T>>& blocks, T tau, const Values<T>& noise, bool with_loss);

  const LayerProblem<T>* problem_;
  PipelineOptions options_;
  Tape<T> tape_;
  HardenStage<T>* harden_ = nullptr;
  HardMaskStage<T>* mask_ = nullptr;
  bool with_loss_ = false;
};

}  // namespace permnm
