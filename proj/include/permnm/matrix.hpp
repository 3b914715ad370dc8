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
#include <initializer_list>
#include <span>
#include <vector>

#include "permnm/permutation.hpp"

namespace permnm {

// Dense row-major matrix. The library is instantiated for float (default
// compute precision) and double (verification precision).
template <class T>
class Matrix {
 public:
  using value_type = T;

  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, T fill = T{0});
  Matrix(std::size_t rows, std::size_t cols, std::vector<T> data);
  Matrix(std::initializer_list<std::initializer_list<T>> rows);

  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  const std::vector<T>& values() const noexcept { return data_; }

  bool all_finite() const noexcept;
  bool same_shape(const Matrix& other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  template <class U>
  Matrix<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return Matrix<U>(rows_, cols_, std::move(out));
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using MatrixF = Matrix<float>;
using MatrixD = Matrix<double>;

// Products accumulate in a fixed i-k-j order so results are bit-reproducible
// for a given precision.
template <class T>
Matrix<T> matmul(const Matrix<T>& a, const Matrix<T>& b);
// a^T * b without materializing the transpose.
template <class T>
Matrix<T> matmul_tn(const Matrix<T>& a, const Matrix<T>& b);
// a * b^T without materializing the transpose.
template <class T>
Matrix<T> matmul_nt(const Matrix<T>& a, const Matrix<T>& b);

template <class T>
Matrix<T> transpose(const Matrix<T>& a);
template <class T>
Matrix<T> hadamard(const Matrix<T>& a, const Matrix<T>& b);
template <class T>
Matrix<T> add(const Matrix<T>& a, const Matrix<T>& b);
template <class T>
Matrix<T> scale(const Matrix<T>& a, T factor);

// Column j of the result is column perm[j] of w, i.e. w * P.
template <class T>
Matrix<T> gather_columns(const Matrix<T>& w, const PermutationIndices& perm);
// Row j of the result is row perm[j] of w, i.e. P^T * w.
template <class T>
Matrix<T> gather_rows(const Matrix<T>& w, const PermutationIndices& perm);

// Copy of columns [begin, end).
template <class T>
Matrix<T> column_block(const Matrix<T>& a, std::size_t begin, std::size_t end);
template <class T>
void set_column_block(Matrix<T>& dst, std::size_t begin, const Matrix<T>& block);

template <class T>
std::vector<T> softmax(std::span<const T> v);

template <class T>
T max_abs_diff(const Matrix<T>& a, const Matrix<T>& b);

template <class T>
T frobenius_norm(const Matrix<T>& a);

}  // namespace permnm
