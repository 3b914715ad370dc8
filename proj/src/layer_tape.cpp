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

#include "permnm/layer_tape.hpp"

#include "permnm/assignment.hpp"
#include "permnm/error.hpp"

namespace permnm {

namespace {

template <class T>
std::optional<std::string> check_blocks(const Values<T>& in, const BlockLayout& layout,
                                        std::size_t trailing) {
  if (in.size() != layout.block_count() + trailing) {
    return "expected " + std::to_string(layout.block_count()) + " blocks plus " +
           std::to_string(trailing) + " trailing values, got " + std::to_string(in.size());
  }
  for (std::size_t b = 0; b < layout.block_count(); ++b) {
    if (in[b].rows() != layout.size(b) || in[b].cols() != layout.size(b))
      return "block " + std::to_string(b) + " is not " + std::to_string(layout.size(b)) +
             " square";
  }
  return std::nullopt;
}

template <class T>
Matrix<T> group_softmax(const Matrix<T>& s, std::size_t group) {
  Matrix<T> out(s.rows(), s.cols());
  for (std::size_t r = 0; r < s.rows(); ++r) {
    const auto row = s.row(r);
    for (std::size_t g = 0; g < s.cols(); g += group) {
      const auto p = softmax<T>(row.subspan(g, group));
      for (std::size_t k = 0; k < group; ++k) out(r, g + k) = p[k];
    }
  }
  return out;
}

template <class T>
Matrix<T> group_softmax_pullback(const Matrix<T>& soft, const Matrix<T>& g, std::size_t group) {
  Matrix<T> out(g.rows(), g.cols());
  for (std::size_t r = 0; r < g.rows(); ++r) {
    const auto s_row = soft.row(r);
    const auto g_row = g.row(r);
    auto o_row = out.row(r);
    for (std::size_t c = 0; c < g.cols(); c += group)
      softmax_pullback<T>(s_row.subspan(c, group), g_row.subspan(c, group), o_row.subspan(c, group));
  }
  return out;
}

template <class T>
Values<T> with_trailing(const Values<T>& in, std::size_t blocks, Matrix<T> last) {
  Values<T> out(in.begin(), in.begin() + static_cast<std::ptrdiff_t>(blocks));
  out.push_back(std::move(last));
  return out;
}

}  // namespace

// ---- harden -------------------------------------------------------------------

template <class T>
HardenStage<T>::HardenStage(BlockLayout layout)
    : Stage<T>("harden"), layout_(std::move(layout)),
      perm_(PermutationIndices::identity(layout_.c_in())) {}

template <class T>
std::optional<std::string> HardenStage<T>::check_input(const Values<T>& in) const {
  return check_blocks(in, layout_, 0);
}

template <class T>
Values<T> HardenStage<T>::forward(const Values<T>& in) {
  Values<T> out;
  std::vector<PermutationIndices> local;
  for (const auto& block : in) {
    local.push_back(solve_lsa(block).perm);
    out.push_back(dense_permutation<T>(local.back()));
  }
  perm_ = assemble_block_permutation(layout_, local);
  return out;
}

template <class T>
Values<T> HardenStage<T>::pullback(const Values<T>& out_adjoint) {
  return out_adjoint;
}

// ---- score permute ------------------------------------------------------------

template <class T>
ScorePermuteStage<T>::ScorePermuteStage(ImportanceScores<T> scores, BlockLayout layout,
                                        bool propagate)
    : Stage<T>("score_permute"), scores_(std::move(scores)), layout_(std::move(layout)),
      propagate_(propagate) {}

template <class T>
std::optional<std::string> ScorePermuteStage<T>::check_input(const Values<T>& in) const {
  if (scores_.scores.cols() != layout_.c_in()) return std::string("scores do not cover C_in");
  return check_blocks(in, layout_, 0);
}

template <class T>
Values<T> ScorePermuteStage<T>::forward(const Values<T>& in) {
  Matrix<T> permuted(scores_.scores.rows(), scores_.scores.cols());
  for (std::size_t b = 0; b < layout_.block_count(); ++b) {
    const auto s_b = column_block(scores_.scores, layout_.begin(b), layout_.end(b));
    set_column_block(permuted, layout_.begin(b), matmul(s_b, in[b]));
  }
  Values<T> out = in;
  out.push_back(std::move(permuted));
  return out;
}

template <class T>
Values<T> ScorePermuteStage<T>::pullback(const Values<T>& out_adjoint) {
  const std::size_t blocks = layout_.block_count();
  Values<T> grad(out_adjoint.begin(), out_adjoint.begin() + static_cast<std::ptrdiff_t>(blocks));
  if (!propagate_) return grad;
  const auto& g_hat = out_adjoint[blocks];
  for (std::size_t b = 0; b < blocks; ++b) {
    const auto s_b = column_block(scores_.scores, layout_.begin(b), layout_.end(b));
    const auto g_b = column_block(g_hat, layout_.begin(b), layout_.end(b));
    grad[b] = add(grad[b], matmul_tn(s_b, g_b));
  }
  return grad;
}

// ---- masks --------------------------------------------------------------------

template <class T>
HardMaskStage<T>::HardMaskStage(NMConfig nm) : Stage<T>("hard_mask"), nm_(nm) {
  nm_.validate();
}

template <class T>
Values<T> HardMaskStage<T>::forward(const Values<T>& in) {
  require(!in.empty(), ErrorCode::shape_mismatch, "hard_mask: empty bundle");
  const ImportanceScores<T> permuted(in.back());
  mask_ = nm_mask(permuted, nm_);
  soft_ = group_softmax(in.back(), nm_.group);
  return with_trailing(in, in.size() - 1, mask_.mask);
}

template <class T>
Values<T> HardMaskStage<T>::pullback(const Values<T>& out_adjoint) {
  const std::size_t blocks = out_adjoint.size() - 1;
  return with_trailing(out_adjoint, blocks,
                       group_softmax_pullback(soft_, out_adjoint.back(), nm_.group));
}

template <class T>
SoftMaskStage<T>::SoftMaskStage(NMConfig nm) : Stage<T>("soft_mask"), nm_(nm) {
  nm_.validate();
}

template <class T>
Values<T> SoftMaskStage<T>::forward(const Values<T>& in) {
  require(!in.empty(), ErrorCode::shape_mismatch, "soft_mask: empty bundle");
  soft_ = group_softmax(in.back(), nm_.group);
  return with_trailing(in, in.size() - 1, soft_);
}

template <class T>
Values<T> SoftMaskStage<T>::pullback(const Values<T>& out_adjoint) {
  const std::size_t blocks = out_adjoint.size() - 1;
  return with_trailing(out_adjoint, blocks,
                       group_softmax_pullback(soft_, out_adjoint.back(), nm_.group));
}

// ---- effective weight ---------------------------------------------------------

template <class T>
EffectiveWeightStage<T>::EffectiveWeightStage(Matrix<T> weight, BlockLayout layout)
    : Stage<T>("effective_weight"), weight_(std::move(weight)), layout_(std::move(layout)) {}

template <class T>
std::optional<std::string> EffectiveWeightStage<T>::check_input(const Values<T>& in) const {
  if (auto problem = check_blocks(in, layout_, 1)) return problem;
  if (!in.back().same_shape(weight_)) return std::string("mask shape differs from the weight");
  return std::nullopt;
}

template <class T>
Values<T> EffectiveWeightStage<T>::forward(const Values<T>& in) {
  const std::size_t blocks = layout_.block_count();
  perms_.assign(in.begin(), in.begin() + static_cast<std::ptrdiff_t>(blocks));
  mask_ = in.back();
  permuted_weight_.clear();
  Matrix<T> out(weight_.rows(), weight_.cols());
  for (std::size_t b = 0; b < blocks; ++b) {
    const auto w_b = column_block(weight_, layout_.begin(b), layout_.end(b));
    const auto m_b = column_block(mask_, layout_.begin(b), layout_.end(b));
    permuted_weight_.push_back(matmul(w_b, perms_[b]));
    set_column_block(out, layout_.begin(b),
                     matmul_nt(hadamard(m_b, permuted_weight_.back()), perms_[b]));
  }
  return {out};
}

// With A_b = M_b .* (W_b P_b) and out_b = A_b P_b^T:
//   dA_b = G_b P_b
//   dP_b = G_b^T A_b + W_b^T (dA_b .* M_b)
//   dM_b = dA_b .* (W_b P_b)
template <class T>
Values<T> EffectiveWeightStage<T>::pullback(const Values<T>& out_adjoint) {
  const auto& g = out_adjoint.at(0);
  const std::size_t blocks = layout_.block_count();
  Values<T> grad;
  Matrix<T> g_mask(mask_.rows(), mask_.cols());
  for (std::size_t b = 0; b < blocks; ++b) {
    const auto g_b = column_block(g, layout_.begin(b), layout_.end(b));
    const auto w_b = column_block(weight_, layout_.begin(b), layout_.end(b));
    const auto m_b = column_block(mask_, layout_.begin(b), layout_.end(b));
    const auto a_b = hadamard(m_b, permuted_weight_[b]);
    const auto g_a = matmul(g_b, perms_[b]);
    grad.push_back(add(matmul_tn(g_b, a_b), matmul_tn(w_b, hadamard(g_a, m_b))));
    set_column_block(g_mask, layout_.begin(b), hadamard(g_a, permuted_weight_[b]));
  }
  grad.push_back(std::move(g_mask));
  perms_.clear();
  permuted_weight_.clear();
  return grad;
}

// ---- inputs and loss ----------------------------------------------------------

template <class T>
ApplyInputStage<T>::ApplyInputStage(Matrix<T> inputs)
    : Stage<T>("apply_input"), inputs_(std::move(inputs)) {}

template <class T>
std::optional<std::string> ApplyInputStage<T>::check_input(const Values<T>& in) const {
  if (in.size() != 1) return std::string("expects a single weight matrix");
  if (in[0].cols() != inputs_.cols())
    return "weight has " + std::to_string(in[0].cols()) + " columns, inputs have " +
           std::to_string(inputs_.cols());
  return std::nullopt;
}

template <class T>
Values<T> ApplyInputStage<T>::forward(const Values<T>& in) {
  return {matmul_nt(inputs_, in[0])};
}

template <class T>
Values<T> ApplyInputStage<T>::pullback(const Values<T>& out_adjoint) {
  return {matmul_tn(out_adjoint.at(0), inputs_)};
}

template <class T>
CosineLossStage<T>::CosineLossStage(Matrix<T> target)
    : Stage<T>("cosine_loss"), target_(std::move(target)) {}

template <class T>
std::optional<std::string> CosineLossStage<T>::check_input(const Values<T>& in) const {
  if (in.size() != 1 || !in[0].same_shape(target_))
    return std::string("expects one output matrix shaped like the target");
  return std::nullopt;
}

template <class T>
Values<T> CosineLossStage<T>::forward(const Values<T>& in) {
  y_tilde_ = in[0];
  return {Matrix<T>(1, 1, loss_cosine(target_, y_tilde_))};
}

template <class T>
Values<T> CosineLossStage<T>::pullback(const Values<T>& out_adjoint) {
  return {scale(loss_cosine_grad(target_, y_tilde_), out_adjoint.at(0)(0, 0))};
}

// ---- tape ---------------------------------------------------------------------

template <class T>
LayerTape<T>::LayerTape(const LayerProblem<T>& problem, PipelineOptions options)
    : problem_(&problem), options_(options) {}

template <class T>
typename LayerTape<T>::Output LayerTape<T>::run(const std::vector<Matrix<T>>& blocks, T tau,
                                                const Values<T>& noise, bool with_loss) {
  const auto& p = *problem_;
  tape_ = Tape<T>();
  harden_ = nullptr;
  mask_ = nullptr;
  append_sinkhorn_stages(tape_, tau, options_.sinkhorn_iters, noise);
  if (!options_.soft_surrogate) harden_ = &tape_.template emplace<HardenStage<T>>(p.layout);
  tape_.template emplace<ScorePermuteStage<T>>(p.scores, p.layout, options_.score_path_gradient);
  if (options_.soft_surrogate) {
    tape_.template emplace<SoftMaskStage<T>>(p.nm);
  } else {
    mask_ = &tape_.template emplace<HardMaskStage<T>>(p.nm);
  }
  tape_.template emplace<EffectiveWeightStage<T>>(p.weight, p.layout);
  if (with_loss) {
    tape_.template emplace<ApplyInputStage<T>>(p.inputs);
    tape_.template emplace<CosineLossStage<T>>(p.target);
  }
  with_loss_ = with_loss;

  auto result = tape_.run_forward(blocks);
  Output out;
  if (harden_ != nullptr) {
    out.perm = harden_->permutation();
    out.mask = mask_->mask();
  }
  if (with_loss) {
    out.loss = result.at(0)(0, 0);
    if (harden_ != nullptr) out.effective_weight = effective_weight(p.weight, out.perm, out.mask);
  } else {
    out.effective_weight = std::move(result.at(0));
  }
  return out;
}

template <class T>
typename LayerTape<T>::Output LayerTape<T>::forward(const std::vector<Matrix<T>>& blocks, T tau,
                                                    const Values<T>& noise) {
  return run(blocks, tau, noise, true);
}

template <class T>
typename LayerTape<T>::Output LayerTape<T>::forward_weight(const std::vector<Matrix<T>>& blocks,
                                                           T tau, const Values<T>& noise) {
  return run(blocks, tau, noise, false);
}

template <class T>
std::vector<Matrix<T>> LayerTape<T>::backward() {
  require(with_loss_, ErrorCode::contract_violation,
          "layer tape: backward() needs a forward() through the loss");
  return tape_.run_backward({Matrix<T>(1, 1, T{1})}).input_adjoint;
}

template <class T>
std::vector<Matrix<T>> LayerTape<T>::backward_weight(const Matrix<T>& effective_weight_adjoint) {
  require(!with_loss_, ErrorCode::contract_violation,
          "layer tape: backward_weight() needs a forward_weight()");
  return tape_.run_backward({effective_weight_adjoint}).input_adjoint;
}

#define PERMNM_INSTANTIATE(T)              \
  template class HardenStage<T>;           \
  template class ScorePermuteStage<T>;     \
  template class HardMaskStage<T>;         \
  template class SoftMaskStage<T>;         \
  template class EffectiveWeightStage<T>;  \
  template class ApplyInputStage<T>;       \
  template class CosineLossStage<T>;       \
  template class LayerTape<T>;

PERMNM_INSTANTIATE(float)
PERMNM_INSTANTIATE(double)

#undef PERMNM_INSTANTIATE

}  // namespace permnm
