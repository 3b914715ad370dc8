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

#include "permnm/graddiff.hpp"

#include <cmath>
#include <limits>

#include "permnm/error.hpp"

namespace permnm {

namespace {

std::string shape_str(std::size_t r, std::size_t c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

template <class T>
std::optional<std::string> same_shapes(const Values<T>& a, const Values<T>& b,
                                       const char* what) {
  if (a.size() != b.size()) {
    return std::string(what) + ": expected " + std::to_string(b.size()) + " values, got " +
           std::to_string(a.size());
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].same_shape(b[i])) {
      return std::string(what) + ": value " + std::to_string(i) + " is " +
             shape_str(a[i].rows(), a[i].cols()) + ", expected " +
             shape_str(b[i].rows(), b[i].cols());
    }
  }
  return std::nullopt;
}

}  // namespace

template <class T>
std::optional<std::string> Stage<T>::check_input(const Values<T>&) const {
  return std::nullopt;
}

// ---- Tape -----------------------------------------------------------------

template <class T>
Stage<T>& Tape<T>::append(std::unique_ptr<Stage<T>> stage) {
  require(stage != nullptr, ErrorCode::contract_violation, "tape: null stage");
  stages_.push_back(std::move(stage));
  forward_done_ = false;
  return *stages_.back();
}

template <class T>
Values<T> Tape<T>::run_forward(const Values<T>& input) {
  forward_done_ = false;
  output_shapes_.assign(stages_.size(), {});
  input_shapes_.clear();
  for (const auto& m : input) input_shapes_.emplace_back(m.rows(), m.cols());

  Values<T> current = input;
  for (std::size_t i = 0; i < stages_.size(); ++i) {
    auto& stage = *stages_[i];
    if (auto problem = stage.check_input(current)) {
      const std::string prev = i == 0 ? std::string("<input>") : stages_[i - 1]->name();
      fail(ErrorCode::shape_mismatch,
           "tape: stage '" + prev + "' cannot feed stage '" + stage.name() + "': " + *problem);
    }
    current = stage.forward(current);
    for (const auto& m : current) output_shapes_[i].emplace_back(m.rows(), m.cols());
  }
  forward_done_ = true;
  return current;
}

template <class T>
BackwardResult<T> Tape<T>::run_backward(const Values<T>& output_adjoint) {
  require(forward_done_, ErrorCode::contract_violation,
          "tape: run_backward called before run_forward");
  BackwardResult<T> result;
  result.parameter_adjoints.resize(stages_.size());

  Values<T> adjoint = output_adjoint;
  for (std::size_t k = stages_.size(); k-- > 0;) {
    const auto& shapes = output_shapes_[k];
    bool ok = adjoint.size() == shapes.size();
    for (std::size_t i = 0; ok && i < shapes.size(); ++i)
      ok = adjoint[i].rows() == shapes[i].first && adjoint[i].cols() == shapes[i].second;
    require(ok, ErrorCode::shape_mismatch,
            "tape: adjoint entering stage '" + stages_[k]->name() +
                "' does not mirror its output shapes");
    adjoint = stages_[k]->pullback(adjoint);
    result.parameter_adjoints[k] = stages_[k]->parameter_adjoints();
  }
  if (stages_.empty()) {
    bool ok = adjoint.size() == input_shapes_.size();
    for (std::size_t i = 0; ok && i < input_shapes_.size(); ++i)
      ok = adjoint[i].rows() == input_shapes_[i].first &&
           adjoint[i].cols() == input_shapes_[i].second;
    require(ok, ErrorCode::shape_mismatch, "tape: adjoint does not mirror the input shapes");
  }
  result.input_adjoint = std::move(adjoint);
  forward_done_ = false;
  return result;
}

// ---- ScaleStage -----------------------------------------------------------

template <class T>
ScaleStage<T>::ScaleStage(T factor, Values<T> offset)
    : Stage<T>("scale"), factor_(factor), offset_(std::move(offset)) {}

template <class T>
std::optional<std::string> ScaleStage<T>::check_input(const Values<T>& in) const {
  if (offset_.empty()) return std::nullopt;
  return same_shapes(in, offset_, "scale offset");
}

template <class T>
Values<T> ScaleStage<T>::forward(const Values<T>& in) {
  Values<T> out = in;
  for (std::size_t b = 0; b < out.size(); ++b) {
    auto d = out[b].data();
    for (std::size_t i = 0; i < d.size(); ++i) {
      const T shifted = offset_.empty() ? d[i] : d[i] + offset_[b].data()[i];
      d[i] = factor_ * shifted;
    }
  }
  return out;
}

template <class T>
Values<T> ScaleStage<T>::pullback(const Values<T>& out_adjoint) {
  Values<T> grad = out_adjoint;
  for (auto& g : grad)
    for (T& v : g.data()) v *= factor_;
  return grad;
}

// ---- ExpStage -------------------------------------------------------------

template <class T>
ExpStage<T>::ExpStage(bool shift_rows) : Stage<T>("exp"), shift_rows_(shift_rows) {}

template <class T>
Values<T> ExpStage<T>::forward(const Values<T>& in) {
  constexpr T tiny = std::numeric_limits<T>::min();
  out_.clear();
  argmax_.assign(in.size(), {});
  clamped_.assign(in.size(), {});
  for (std::size_t b = 0; b < in.size(); ++b) {
    const auto& x = in[b];
    require(x.all_finite(), ErrorCode::non_finite, "exp: input is not finite");
    Matrix<T> y(x.rows(), x.cols());
    argmax_[b].assign(x.rows(), 0);
    clamped_[b].assign(x.size(), false);
    for (std::size_t r = 0; r < x.rows(); ++r) {
      T shift{0};
      if (shift_rows_) {
        const auto row = x.row(r);
        std::size_t best = 0;
        for (std::size_t c = 1; c < row.size(); ++c)
          if (row[c] > row[best]) best = c;
        argmax_[b][r] = best;
        shift = row[best];
      }
      for (std::size_t c = 0; c < x.cols(); ++c) {
        T e = std::exp(x(r, c) - shift);
        if (!std::isfinite(e)) {
          fail(ErrorCode::overflow,
               "exp overflowed; scale the input down (divide by the temperature first) "
               "or enable the row shift");
        }
        if (e < tiny) {
          e = tiny;
          clamped_[b][r * x.cols() + c] = true;
        }
        y(r, c) = e;
      }
    }
    out_.push_back(std::move(y));
  }
  return out_;
}

template <class T>
Values<T> ExpStage<T>::pullback(const Values<T>& out_adjoint) {
  Values<T> grad;
  for (std::size_t b = 0; b < out_adjoint.size(); ++b) {
    const auto& g = out_adjoint[b];
    const auto& y = out_[b];
    Matrix<T> gx(g.rows(), g.cols());
    for (std::size_t r = 0; r < g.rows(); ++r) {
      T row_total{0};
      for (std::size_t c = 0; c < g.cols(); ++c) {
        if (clamped_[b][r * g.cols() + c]) continue;
        const T v = g(r, c) * y(r, c);
        gx(r, c) = v;
        row_total += v;
      }
      if (shift_rows_) gx(r, argmax_[b][r]) -= row_total;
    }
    grad.push_back(std::move(gx));
  }
  out_.clear();
  return grad;
}

// ---- LinearStage ----------------------------------------------------------

template <class T>
LinearStage<T>::LinearStage(Matrix<T> a) : Stage<T>("linear"), a_(std::move(a)) {}

template <class T>
std::optional<std::string> LinearStage<T>::check_input(const Values<T>& in) const {
  for (const auto& x : in) {
    if (x.rows() != a_.cols()) {
      return "linear map with " + std::to_string(a_.cols()) + " columns cannot take " +
             shape_str(x.rows(), x.cols());
    }
  }
  return std::nullopt;
}

template <class T>
Values<T> LinearStage<T>::forward(const Values<T>& in) {
  in_ = in;
  Values<T> out;
  for (const auto& x : in) out.push_back(matmul(a_, x));
  return out;
}

template <class T>
Values<T> LinearStage<T>::pullback(const Values<T>& out_adjoint) {
  grad_a_ = Matrix<T>(a_.rows(), a_.cols());
  Values<T> grad;
  for (std::size_t b = 0; b < out_adjoint.size(); ++b) {
    grad.push_back(matmul_tn(a_, out_adjoint[b]));
    grad_a_ = add(grad_a_, matmul_nt(out_adjoint[b], in_[b]));
  }
  in_.clear();
  return grad;
}

// ---- GroupSoftmaxStage ----------------------------------------------------

template <class T>
void softmax_pullback(std::span<const T> s, std::span<const T> g, std::span<T> grad_in) {
  T dot{0};
  for (std::size_t i = 0; i < s.size(); ++i) dot += s[i] * g[i];
  for (std::size_t i = 0; i < s.size(); ++i) grad_in[i] = s[i] * (g[i] - dot);
}

template <class T>
GroupSoftmaxStage<T>::GroupSoftmaxStage(std::size_t group)
    : Stage<T>("group_softmax"), group_(group) {
  require(group > 0, ErrorCode::contract_violation, "group_softmax: group must be positive");
}

template <class T>
std::optional<std::string> GroupSoftmaxStage<T>::check_input(const Values<T>& in) const {
  for (const auto& x : in) {
    if (x.cols() % group_ != 0) {
      return "column count " + std::to_string(x.cols()) + " is not a multiple of group " +
             std::to_string(group_);
    }
  }
  return std::nullopt;
}

template <class T>
Values<T> GroupSoftmaxStage<T>::forward(const Values<T>& in) {
  out_.clear();
  for (const auto& x : in) {
    Matrix<T> y(x.rows(), x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r) {
      for (std::size_t c0 = 0; c0 < x.cols(); c0 += group_) {
        const auto s = softmax<T>(x.row(r).subspan(c0, group_));
        std::copy(s.begin(), s.end(), y.row(r).begin() + c0);
      }
    }
    out_.push_back(std::move(y));
  }
  return out_;
}

template <class T>
Values<T> GroupSoftmaxStage<T>::pullback(const Values<T>& out_adjoint) {
  Values<T> grad;
  for (std::size_t b = 0; b < out_adjoint.size(); ++b) {
    const auto& g = out_adjoint[b];
    Matrix<T> gx(g.rows(), g.cols());
    for (std::size_t r = 0; r < g.rows(); ++r)
      for (std::size_t c0 = 0; c0 < g.cols(); c0 += group_)
        softmax_pullback<T>(std::span<const T>(out_[b].row(r)).subspan(c0, group_),
                            g.row(r).subspan(c0, group_), gx.row(r).subspan(c0, group_));
    grad.push_back(std::move(gx));
  }
  out_.clear();
  return grad;
}

// ---- DotStage -------------------------------------------------------------

template <class T>
DotStage<T>::DotStage(Values<T> coefficients)
    : Stage<T>("dot"), coefficients_(std::move(coefficients)) {}

template <class T>
std::optional<std::string> DotStage<T>::check_input(const Values<T>& in) const {
  return same_shapes(in, coefficients_, "dot");
}

template <class T>
Values<T> DotStage<T>::forward(const Values<T>& in) {
  T acc{0};
  for (std::size_t b = 0; b < in.size(); ++b)
    for (std::size_t i = 0; i < in[b].size(); ++i)
      acc += in[b].data()[i] * coefficients_[b].data()[i];
  return {Matrix<T>(1, 1, acc)};
}

template <class T>
Values<T> DotStage<T>::pullback(const Values<T>& out_adjoint) {
  const T seed = out_adjoint.at(0)(0, 0);
  Values<T> grad;
  for (const auto& c : coefficients_) grad.push_back(scale(c, seed));
  return grad;
}

// ---- StraightThroughStage -------------------------------------------------

template <class T>
StraightThroughStage<T>::StraightThroughStage(std::string name, Map map)
    : Stage<T>(std::move(name)), map_(std::move(map)) {}

template <class T>
Values<T> StraightThroughStage<T>::forward(const Values<T>& in) {
  Values<T> out = map_(in);
  require(same_shapes(out, in, "straight-through map") == std::nullopt,
          ErrorCode::shape_mismatch,
          "straight-through stage '" + this->name() + "' must preserve shapes");
  return out;
}

template <class T>
Values<T> StraightThroughStage<T>::pullback(const Values<T>& out_adjoint) {
  return out_adjoint;
}

// ---- finite differences ---------------------------------------------------

template <class T>
GradientCheck<T> finite_diff_check(const std::function<T(const Values<T>&)>& f,
                                   const Values<T>& analytic, const Values<T>& point,
                                   T epsilon) {
  require(epsilon > T{0}, ErrorCode::contract_violation, "finite_diff_check: epsilon <= 0");
  require(same_shapes(analytic, point, "finite_diff_check") == std::nullopt,
          ErrorCode::shape_mismatch, "finite_diff_check: gradient shape differs from point");
  GradientCheck<T> report;
  Values<T> probe = point;
  for (std::size_t b = 0; b < probe.size(); ++b) {
    for (std::size_t i = 0; i < probe[b].size(); ++i) {
      T& coord = probe[b].data()[i];
      const T original = coord;
      coord = original + epsilon;
      const T plus = f(probe);
      coord = original - epsilon;
      const T minus = f(probe);
      coord = original;
      require(std::isfinite(plus) && std::isfinite(minus), ErrorCode::non_finite,
              "finite_diff_check: non-finite value while probing block " + std::to_string(b) +
                  " index " + std::to_string(i));
      const T numeric = (plus - minus) / (T{2} * epsilon);
      const T a = analytic[b].data()[i];
      const T rel = std::abs(a - numeric) / (std::abs(numeric) + T(1e-12));
      if (rel > report.max_relative_error || (b == 0 && i == 0)) {
        report = {rel, b, i, a, numeric};
      }
    }
  }
  return report;
}

template <class T>
GradientCheck<T> finite_diff_check(Tape<T>& tape, const Values<T>& point, T epsilon) {
  auto out = tape.run_forward(point);
  require(out.size() == 1 && out[0].rows() == 1 && out[0].cols() == 1,
          ErrorCode::shape_mismatch, "finite_diff_check: tape output must be a single 1x1 value");
  const auto analytic = tape.run_backward({Matrix<T>(1, 1, T{1})}).input_adjoint;
  std::function<T(const Values<T>&)> f = [&tape](const Values<T>& x) {
    return tape.run_forward(x)[0](0, 0);
  };
  return finite_diff_check<T>(f, analytic, point, epsilon);
}

#define PERMNM_INSTANTIATE(T)                                                             \
  template class Stage<T>;                                                                \
  template class Tape<T>;                                                                 \
  template class ScaleStage<T>;                                                           \
  template class ExpStage<T>;                                                             \
  template class LinearStage<T>;                                                          \
  template class GroupSoftmaxStage<T>;                                                    \
  template class DotStage<T>;                                                             \
  template class StraightThroughStage<T>;                                                 \
  template void softmax_pullback(std::span<const T>, std::span<const T>, std::span<T>);   \
  template GradientCheck<T> finite_diff_check(const std::function<T(const Values<T>&)>&,  \
                                              const Values<T>&, const Values<T>&, T);     \
  template GradientCheck<T> finite_diff_check(Tape<T>&, const Values<T>&, T);

PERMNM_INSTANTIATE(float)
PERMNM_INSTANTIATE(double)

#undef PERMNM_INSTANTIATE

}  // namespace permnm
