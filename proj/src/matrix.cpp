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

#include "permnm/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "permnm/error.hpp"

namespace permnm {

bool is_bijection(std::span<const std::size_t> perm) {
  std::vector<bool> seen(perm.size(), false);
  for (std::size_t p : perm) {
    if (p >= perm.size() || seen[p]) return false;
    seen[p] = true;
  }
  return true;
}

PermutationIndices::PermutationIndices(std::vector<std::size_t> perm) : perm_(std::move(perm)) {
  require(is_bijection(perm_), ErrorCode::not_a_permutation,
          "index array of length " + std::to_string(perm_.size()) + " is not a bijection");
}

PermutationIndices PermutationIndices::identity(std::size_t n) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  return PermutationIndices(std::move(perm));
}

PermutationIndices PermutationIndices::inverse() const {
  std::vector<std::size_t> inv(perm_.size());
  for (std::size_t j = 0; j < perm_.size(); ++j) inv[perm_[j]] = j;
  return PermutationIndices(std::move(inv));
}

bool PermutationIndices::is_identity() const noexcept {
  for (std::size_t j = 0; j < perm_.size(); ++j) {
    if (perm_[j] != j) return false;
  }
  return true;
}

namespace {

std::string shape_str(std::size_t r, std::size_t c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

template <class T>
void require_same_shape(const Matrix<T>& a, const Matrix<T>& b, const char* op) {
  require(a.same_shape(b), ErrorCode::shape_mismatch,
          std::string(op) + ": shapes " + shape_str(a.rows(), a.cols()) + " and " +
              shape_str(b.rows(), b.cols()) + " differ");
}

}  // namespace

template <class T>
Matrix<T>::Matrix(std::size_t rows, std::size_t cols, T fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {
  require(rows > 0 && cols > 0, ErrorCode::contract_violation,
          "matrix dimensions must be positive, got " + shape_str(rows, cols));
}

template <class T>
Matrix<T>::Matrix(std::size_t rows, std::size_t cols, std::vector<T> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  require(rows > 0 && cols > 0, ErrorCode::contract_violation,
          "matrix dimensions must be positive, got " + shape_str(rows, cols));
  require(data_.size() == rows * cols, ErrorCode::shape_mismatch,
          "matrix data length " + std::to_string(data_.size()) + " does not match " +
              shape_str(rows, cols));
}

template <class T>
Matrix<T>::Matrix(std::initializer_list<std::initializer_list<T>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  require(rows_ > 0 && cols_ > 0, ErrorCode::contract_violation, "empty matrix literal");
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    require(r.size() == cols_, ErrorCode::shape_mismatch, "ragged matrix literal");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

template <class T>
Matrix<T> Matrix<T>::identity(std::size_t n) {
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i) out(i, i) = T{1};
  return out;
}

template <class T>
bool Matrix<T>::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
}

template <class T>
Matrix<T> matmul(const Matrix<T>& a, const Matrix<T>& b) {
  require(a.cols() == b.rows(), ErrorCode::shape_mismatch,
          "matmul: " + shape_str(a.rows(), a.cols()) + " x " + shape_str(b.rows(), b.cols()));
  Matrix<T> out(a.rows(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    T* o = out.data().data() + i * n;
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const T aik = a(i, k);
      const T* brow = b.data().data() + k * n;
      for (std::size_t j = 0; j < n; ++j) o[j] += aik * brow[j];
    }
  }
  return out;
}

template <class T>
Matrix<T> matmul_tn(const Matrix<T>& a, const Matrix<T>& b) {
  require(a.rows() == b.rows(), ErrorCode::shape_mismatch,
          "matmul_tn: " + shape_str(a.rows(), a.cols()) + "^T x " +
              shape_str(b.rows(), b.cols()));
  Matrix<T> out(a.cols(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t k = 0; k < a.rows(); ++k) {
    const T* brow = b.data().data() + k * n;
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const T aki = a(k, i);
      T* o = out.data().data() + i * n;
      for (std::size_t j = 0; j < n; ++j) o[j] += aki * brow[j];
    }
  }
  return out;
}

template <class T>
Matrix<T> matmul_nt(const Matrix<T>& a, const Matrix<T>& b) {
  require(a.cols() == b.cols(), ErrorCode::shape_mismatch,
          "matmul_nt: " + shape_str(a.rows(), a.cols()) + " x " +
              shape_str(b.rows(), b.cols()) + "^T");
  Matrix<T> out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto ar = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const auto br = b.row(j);
      T acc{0};
      for (std::size_t k = 0; k < a.cols(); ++k) acc += ar[k] * br[k];
      out(i, j) = acc;
    }
  }
  return out;
}

template <class T>
Matrix<T> transpose(const Matrix<T>& a) {
  Matrix<T> out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

template <class T>
Matrix<T> hadamard(const Matrix<T>& a, const Matrix<T>& b) {
  require_same_shape(a, b, "hadamard");
  Matrix<T> out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] * b.data()[i];
  return out;
}

template <class T>
Matrix<T> add(const Matrix<T>& a, const Matrix<T>& b) {
  require_same_shape(a, b, "add");
  Matrix<T> out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] + b.data()[i];
  return out;
}

template <class T>
Matrix<T> scale(const Matrix<T>& a, T factor) {
  Matrix<T> out = a;
  for (T& v : out.data()) v *= factor;
  return out;
}

template <class T>
Matrix<T> gather_columns(const Matrix<T>& w, const PermutationIndices& perm) {
  require(perm.size() == w.cols(), ErrorCode::shape_mismatch,
          "gather_columns: permutation length " + std::to_string(perm.size()) +
              " != column count " + std::to_string(w.cols()));
  Matrix<T> out(w.rows(), w.cols());
  for (std::size_t i = 0; i < w.rows(); ++i) {
    const auto src = w.row(i);
    auto dst = out.row(i);
    for (std::size_t j = 0; j < w.cols(); ++j) dst[j] = src[perm[j]];
  }
  return out;
}

template <class T>
Matrix<T> gather_rows(const Matrix<T>& w, const PermutationIndices& perm) {
  require(perm.size() == w.rows(), ErrorCode::shape_mismatch,
          "gather_rows: permutation length " + std::to_string(perm.size()) +
              " != row count " + std::to_string(w.rows()));
  Matrix<T> out(w.rows(), w.cols());
  for (std::size_t j = 0; j < w.rows(); ++j) {
    const auto src = w.row(perm[j]);
    std::copy(src.begin(), src.end(), out.row(j).begin());
  }
  return out;
}

template <class T>
Matrix<T> column_block(const Matrix<T>& a, std::size_t begin, std::size_t end) {
  require(begin < end && end <= a.cols(), ErrorCode::contract_violation,
          "column_block: bad range");
  Matrix<T> out(a.rows(), end - begin);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto src = a.row(i);
    std::copy(src.begin() + begin, src.begin() + end, out.row(i).begin());
  }
  return out;
}

template <class T>
void set_column_block(Matrix<T>& dst, std::size_t begin, const Matrix<T>& block) {
  require(block.rows() == dst.rows() && begin + block.cols() <= dst.cols(),
          ErrorCode::shape_mismatch, "set_column_block: block does not fit");
  for (std::size_t i = 0; i < dst.rows(); ++i) {
    const auto src = block.row(i);
    std::copy(src.begin(), src.end(), dst.row(i).begin() + begin);
  }
}

template <class T>
std::vector<T> softmax(std::span<const T> v) {
  require(!v.empty(), ErrorCode::contract_violation, "softmax of an empty vector");
  T peak = v[0];
  for (T x : v) {
    require(std::isfinite(x), ErrorCode::non_finite, "softmax input is not finite");
    peak = std::max(peak, x);
  }
  std::vector<T> out(v.size());
  T sum{0};
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - peak);
    sum += out[i];
  }
  for (T& x : out) x /= sum;
  return out;
}

template <class T>
T max_abs_diff(const Matrix<T>& a, const Matrix<T>& b) {
  require_same_shape(a, b, "max_abs_diff");
  T worst{0};
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
  return worst;
}

template <class T>
T frobenius_norm(const Matrix<T>& a) {
  T acc{0};
  for (T v : a.data()) acc += v * v;
  return std::sqrt(acc);
}

#define PERMNM_INSTANTIATE(T)                                                          \
  template class Matrix<T>;                                                            \
  template Matrix<T> matmul(const Matrix<T>&, const Matrix<T>&);                       \
  template Matrix<T> matmul_tn(const Matrix<T>&, const Matrix<T>&);                    \
  template Matrix<T> matmul_nt(const Matrix<T>&, const Matrix<T>&);                    \
  template Matrix<T> transpose(const Matrix<T>&);                                      \
  template Matrix<T> hadamard(const Matrix<T>&, const Matrix<T>&);                     \
  template Matrix<T> add(const Matrix<T>&, const Matrix<T>&);                          \
  template Matrix<T> scale(const Matrix<T>&, T);                                       \
  template Matrix<T> gather_columns(const Matrix<T>&, const PermutationIndices&);      \
  template Matrix<T> gather_rows(const Matrix<T>&, const PermutationIndices&);         \
  template Matrix<T> column_block(const Matrix<T>&, std::size_t, std::size_t);         \
  template void set_column_block(Matrix<T>&, std::size_t, const Matrix<T>&);           \
  template std::vector<T> softmax(std::span<const T>);                                 \
  template T max_abs_diff(const Matrix<T>&, const Matrix<T>&);                         \
  template T frobenius_norm(const Matrix<T>&);

PERMNM_INSTANTIATE(float)
PERMNM_INSTANTIATE(double)

#undef PERMNM_INSTANTIATE

}  // namespace permnm
