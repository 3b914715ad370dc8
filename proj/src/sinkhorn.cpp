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

#include "permnm/sinkhorn.hpp"

#include <cmath>
#include <string>

#include "permnm/error.hpp"

namespace permnm {

void TemperatureSchedule::validate() const {
  require(tau_start > 0.0 && tau_end > 0.0, ErrorCode::contract_violation,
          "temperature schedule: temperatures must be positive");
  require(tau_end <= tau_start, ErrorCode::contract_violation,
          "temperature schedule: tau_end must not exceed tau_start");
  require(total_steps > 0, ErrorCode::contract_violation,
          "temperature schedule: total_steps must be positive");
}

double tau_at(const TemperatureSchedule& schedule, std::size_t step) {
  schedule.validate();
  if (step > schedule.total_steps) {
    warn("tau_at: step " + std::to_string(step) + " clamped to " +
         std::to_string(schedule.total_steps));
    step = schedule.total_steps;
  }
  const double frac = static_cast<double>(step) / static_cast<double>(schedule.total_steps);
  return schedule.tau_start + (schedule.tau_end - schedule.tau_start) * frac;
}

template <class T>
void row_normalize(Matrix<T>& m, std::vector<T>& sums) {
  sums.assign(m.rows(), T{0});
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    T s{0};
    for (T v : row) s += v;
    require(s > T{0} && std::isfinite(s), ErrorCode::non_finite,
            "row_normalize: row " + std::to_string(r) + " sum is not positive and finite");
    sums[r] = s;
    for (T& v : row) v /= s;
  }
}

template <class T>
void column_normalize(Matrix<T>& m, std::vector<T>& sums) {
  sums.assign(m.cols(), T{0});
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    for (std::size_t c = 0; c < m.cols(); ++c) sums[c] += row[c];
  }
  for (std::size_t c = 0; c < m.cols(); ++c) {
    require(sums[c] > T{0} && std::isfinite(sums[c]), ErrorCode::non_finite,
            "column_normalize: column " + std::to_string(c) +
                " sum is not positive and finite");
  }
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    for (std::size_t c = 0; c < m.cols(); ++c) row[c] /= sums[c];
  }
}

template <class T>
SoftPermutation<T> sinkhorn_normalize(const Matrix<T>& x, std::size_t iterations) {
  require(x.rows() == x.cols(), ErrorCode::shape_mismatch,
          "sinkhorn_normalize: input must be square");
  ExpStage<T> exp_stage(iterations > 0);
  Matrix<T> s = exp_stage.forward({x})[0];
  std::vector<T> sums;
  for (std::size_t i = 0; i < iterations; ++i) {
    row_normalize(s, sums);
    column_normalize(s, sums);
  }
  return {std::move(s)};
}

template <class T>
SoftPermutation<T> soft_permutation(const Matrix<T>& w_p, T tau, std::size_t iterations) {
  require(tau > T{0}, ErrorCode::contract_violation, "soft_permutation: tau must be positive");
  return sinkhorn_normalize(scale(w_p, T{1} / tau), iterations);
}

template <class T>
MarginalError<T> marginal_error(const Matrix<T>& m) {
  MarginalError<T> err;
  std::vector<T> col(m.cols(), T{0});
  for (std::size_t r = 0; r < m.rows(); ++r) {
    T s{0};
    const auto row = m.row(r);
    for (std::size_t c = 0; c < m.cols(); ++c) {
      s += row[c];
      col[c] += row[c];
    }
    err.max_row_error = std::max(err.max_row_error, std::abs(s - T{1}));
  }
  for (T s : col) err.max_col_error = std::max(err.max_col_error, std::abs(s - T{1}));
  return err;
}

template <class T>
Values<T> RowNormalizeStage<T>::forward(const Values<T>& in) {
  out_ = in;
  sums_.assign(in.size(), {});
  for (std::size_t b = 0; b < out_.size(); ++b) row_normalize(out_[b], sums_[b]);
  return out_;
}

// y = x / r with r_i = sum_j x_ij:  dx_ij = (g_ij - sum_k g_ik y_ik) / r_i
template <class T>
Values<T> RowNormalizeStage<T>::pullback(const Values<T>& out_adjoint) {
  Values<T> grad;
  for (std::size_t b = 0; b < out_adjoint.size(); ++b) {
    const auto& g = out_adjoint[b];
    const auto& y = out_[b];
    Matrix<T> gx(g.rows(), g.cols());
    for (std::size_t r = 0; r < g.rows(); ++r) {
      T dot{0};
      for (std::size_t c = 0; c < g.cols(); ++c) dot += g(r, c) * y(r, c);
      for (std::size_t c = 0; c < g.cols(); ++c) gx(r, c) = (g(r, c) - dot) / sums_[b][r];
    }
    grad.push_back(std::move(gx));
  }
  out_.clear();
  return grad;
}

template <class T>
Values<T> ColumnNormalizeStage<T>::forward(const Values<T>& in) {
  out_ = in;
  sums_.assign(in.size(), {});
  for (std::size_t b = 0; b < out_.size(); ++b) column_normalize(out_[b], sums_[b]);
  return out_;
}

template <class T>
Values<T> ColumnNormalizeStage<T>::pullback(const Values<T>& out_adjoint) {
  Values<T> grad;
  for (std::size_t b = 0; b < out_adjoint.size(); ++b) {
    const auto& g = out_adjoint[b];
    const auto& y = out_[b];
    std::vector<T> dot(g.cols(), T{0});
    for (std::size_t r = 0; r < g.rows(); ++r)
      for (std::size_t c = 0; c < g.cols(); ++c) dot[c] += g(r, c) * y(r, c);
    Matrix<T> gx(g.rows(), g.cols());
    for (std::size_t r = 0; r < g.rows(); ++r)
      for (std::size_t c = 0; c < g.cols(); ++c) gx(r, c) = (g(r, c) - dot[c]) / sums_[b][c];
    grad.push_back(std::move(gx));
  }
  out_.clear();
  return grad;
}

template <class T>
void append_sinkhorn_stages(Tape<T>& tape, T tau, std::size_t iterations, Values<T> noise) {
  require(tau > T{0}, ErrorCode::contract_violation, "sinkhorn: tau must be positive");
  tape.template emplace<ScaleStage<T>>(T{1} / tau, std::move(noise));
  tape.template emplace<ExpStage<T>>(iterations > 0);
  for (std::size_t i = 0; i < iterations; ++i) {
    tape.template emplace<RowNormalizeStage<T>>();
    tape.template emplace<ColumnNormalizeStage<T>>();
  }
}

#define PERMNM_INSTANTIATE(T)                                                     \
  template SoftPermutation<T> sinkhorn_normalize(const Matrix<T>&, std::size_t);  \
  template SoftPermutation<T> soft_permutation(const Matrix<T>&, T, std::size_t); \
  template MarginalError<T> marginal_error(const Matrix<T>&);                     \
  template void row_normalize(Matrix<T>&, std::vector<T>&);                       \
  template void column_normalize(Matrix<T>&, std::vector<T>&);                    \
  template class RowNormalizeStage<T>;                                            \
  template class ColumnNormalizeStage<T>;                                         \
  template void append_sinkhorn_stages(Tape<T>&, T, std::size_t, Values<T>);

PERMNM_INSTANTIATE(float)
PERMNM_INSTANTIATE(double)

#undef PERMNM_INSTANTIATE

}  // namespace permnm
