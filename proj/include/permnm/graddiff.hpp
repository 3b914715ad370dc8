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
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "permnm/matrix.hpp"

namespace permnm {

// A bundle of matrices flowing between stages. Block-wise pipelines carry one
// matrix per permutation block plus whatever side values later stages need.
template <class T>
using Values = std::vector<Matrix<T>>;

enum class StageKind {
  exact,               // pullback is the true vector-Jacobian product
  straight_through,    // pullback forwards the adjoint unchanged
  surrogate_gradient,  // pullback uses a smooth stand-in's Jacobian
};

template <class T>
class Stage {
 public:
  explicit Stage(std::string name) : name_(std::move(name)) {}
  virtual ~Stage() = default;

  const std::string& name() const noexcept { return name_; }
  virtual StageKind kind() const noexcept { return StageKind::exact; }

  // Explanation of why `in` cannot feed this stage, or nullopt.
  virtual std::optional<std::string> check_input(const Values<T>& in) const;

  // Evaluates the stage and caches what pullback needs.
  virtual Values<T> forward(const Values<T>& in) = 0;
  // Consumes the cache of the last forward.
  virtual Values<T> pullback(const Values<T>& out_adjoint) = 0;
  // Adjoints of stage-owned parameters from the last pullback.
  virtual Values<T> parameter_adjoints() const { return {}; }

 private:
  std::string name_;
};

template <class T>
struct BackwardResult {
  Values<T> input_adjoint;
  // One entry per stage, in stage order; empty for parameter-free stages.
  std::vector<Values<T>> parameter_adjoints;
};

// Fixed reverse-mode pipeline: stage i's output feeds stage i+1.
template <class T>
class Tape {
 public:
  Stage<T>& append(std::unique_ptr<Stage<T>> stage);

  template <class S, class... Args>
  S& emplace(Args&&... args) {
    auto owned = std::make_unique<S>(std::forward<Args>(args)...);
    S& ref = *owned;
    append(std::move(owned));
    return ref;
  }

  std::size_t size() const noexcept { return stages_.size(); }
  Stage<T>& stage(std::size_t i) { return *stages_.at(i); }
  const Stage<T>& stage(std::size_t i) const { return *stages_.at(i); }
  bool has_forward() const noexcept { return forward_done_; }

  Values<T> run_forward(const Values<T>& input);
  BackwardResult<T> run_backward(const Values<T>& output_adjoint);

 private:
  std::vector<std::unique_ptr<Stage<T>>> stages_;
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> output_shapes_;
  std::vector<std::pair<std::size_t, std::size_t>> input_shapes_;
  bool forward_done_ = false;
};

// ---- generic stages -------------------------------------------------------

// y = factor * (x + offset), elementwise on every matrix of the bundle. The
// offset is an optional constant (e.g. injected noise).
template <class T>
class ScaleStage final : public Stage<T> {
 public:
  explicit ScaleStage(T factor, Values<T> offset = {});
  std::optional<std::string> check_input(const Values<T>& in) const override;
  Values<T> forward(const Values<T>& in) override;
  Values<T> pullback(const Values<T>& out_adjoint) override;

 private:
  T factor_;
  Values<T> offset_;
};

// y = exp(x), or exp(x - rowmax(x)) when shift_rows is set. The row shift is
// a diagonal rescaling that any later row normalization cancels; its exact
// Jacobian is still used so the stage checks out in isolation.
template <class T>
class ExpStage final : public Stage<T> {
 public:
  explicit ExpStage(bool shift_rows);
  Values<T> forward(const Values<T>& in) override;
  Values<T> pullback(const Values<T>& out_adjoint) override;

 private:
  bool shift_rows_;
  Values<T> out_;
  std::vector<std::vector<std::size_t>> argmax_;
  std::vector<std::vector<bool>> clamped_;
};

// y_i = A * x_i for each matrix in the bundle; A is a parameter.
template <class T>
class LinearStage final : public Stage<T> {
 public:
  explicit LinearStage(Matrix<T> a);
  std::optional<std::string> check_input(const Values<T>& in) const override;
  Values<T> forward(const Values<T>& in) override;
  Values<T> pullback(const Values<T>& out_adjoint) override;
  Values<T> parameter_adjoints() const override { return {grad_a_}; }

 private:
  Matrix<T> a_;
  Values<T> in_;
  Matrix<T> grad_a_;
};

// Softmax over disjoint runs of `group` entries in every row.
template <class T>
class GroupSoftmaxStage final : public Stage<T> {
 public:
  explicit GroupSoftmaxStage(std::size_t group);
  std::optional<std::string> check_input(const Values<T>& in) const override;
  Values<T> forward(const Values<T>& in) override;
  Values<T> pullback(const Values<T>& out_adjoint) override;

 private:
  std::size_t group_;
  Values<T> out_;
};

// Scalar sum_i <c_i, x_i>, returned as a 1x1 matrix.
template <class T>
class DotStage final : public Stage<T> {
 public:
  explicit DotStage(Values<T> coefficients);
  std::optional<std::string> check_input(const Values<T>& in) const override;
  Values<T> forward(const Values<T>& in) override;
  Values<T> pullback(const Values<T>& out_adjoint) override;

 private:
  Values<T> coefficients_;
};

// Applies an arbitrary non-differentiable map forward and passes adjoints
// through untouched.
template <class T>
class StraightThroughStage final : public Stage<T> {
 public:
  using Map = std::function<Values<T>(const Values<T>&)>;
  StraightThroughStage(std::string name, Map map);
  StageKind kind() const noexcept override { return StageKind::straight_through; }
  Values<T> forward(const Values<T>& in) override;
  Values<T> pullback(const Values<T>& out_adjoint) override;

 private:
  Map map_;
};

// Softmax pullback for one contiguous run: grad_in = s * (g - <s, g>).
template <class T>
void softmax_pullback(std::span<const T> s, std::span<const T> g, std::span<T> grad_in);

// ---- finite differences ---------------------------------------------------

template <class T>
struct GradientCheck {
  T max_relative_error = T{0};
  std::size_t worst_block = 0;
  std::size_t worst_index = 0;
  T analytic = T{0};
  T numeric = T{0};
};

// Central differences on every coordinate of `point`; relative error is
// |analytic - numeric| / (|numeric| + 1e-12).
template <class T>
GradientCheck<T> finite_diff_check(const std::function<T(const Values<T>&)>& f,
                                   const Values<T>& analytic, const Values<T>& point,
                                   T epsilon);

// Same, for a tape whose output is a single 1x1 value.
template <class T>
GradientCheck<T> finite_diff_check(Tape<T>& tape, const Values<T>& point, T epsilon);

}  // namespace permnm
