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

#include "permnm/graddiff.hpp"
#include "permnm/matrix.hpp"

namespace permnm {

// Approximately doubly stochastic relaxation of an n x n permutation matrix.
template <class T>
struct SoftPermutation {
  Matrix<T> entries;

  std::size_t n() const noexcept { return entries.rows(); }
};

// Linear temperature decay, updated once per optimizer step.
struct TemperatureSchedule {
  double tau_start = 1.0;
  double tau_end = 0.1;
  std::size_t total_steps = 50;

  void validate() const;
};

// tau_start + (tau_end - tau_start) * step / total_steps. Steps past the end
// are clamped with a warning.
double tau_at(const TemperatureSchedule& schedule, std::size_t step);

// exp(x) followed by `iterations` rounds of row normalization then column
// normalization. For iterations >= 1 the exponent is shifted by each row's
// maximum, which the first row normalization cancels exactly; entries that
// would underflow are clamped to the smallest normal value so the result stays
// strictly positive.
template <class T>
SoftPermutation<T> sinkhorn_normalize(const Matrix<T>& x, std::size_t iterations);

// sinkhorn_normalize(w_p / tau, iterations).
template <class T>
SoftPermutation<T> soft_permutation(const Matrix<T>& w_p, T tau, std::size_t iterations);

template <class T>
struct MarginalError {
  T max_row_error = T{0};
  T max_col_error = T{0};
};

// max |row sum - 1| and max |column sum - 1|.
template <class T>
MarginalError<T> marginal_error(const Matrix<T>& m);

// In-place normalizations; `sums` receives the divisors.
template <class T>
void row_normalize(Matrix<T>& m, std::vector<T>& sums);
template <class T>
void column_normalize(Matrix<T>& m, std::vector<T>& sums);

template <class T>
class RowNormalizeStage final : public Stage<T> {
 public:
  RowNormalizeStage() : Stage<T>("row_normalize") {}
  Values<T> forward(const Values<T>& in) override;
  Values<T> pullback(const Values<T>& out_adjoint) override;

 private:
  Values<T> out_;
  std::vector<std::vector<T>> sums_;
};

template <class T>
class ColumnNormalizeStage final : public Stage<T> {
 public:
  ColumnNormalizeStage() : Stage<T>("column_normalize") {}
  Values<T> forward(const Values<T>& in) override;
  Values<T> pullback(const Values<T>& out_adjoint) override;

 private:
  Values<T> out_;
  std::vector<std::vector<T>> sums_;
};

// Appends scale(1/tau) -> exp -> iterations x (row, column) normalization,
// operating on every block of the bundle. `noise` (optional, same shapes as
// the input) is added before scaling, as in Gumbel-Sinkhorn.
template <class T>
void append_sinkhorn_stages(Tape<T>& tape, T tau, std::size_t iterations,
                            Values<T> noise = {});

}  // namespace permnm
