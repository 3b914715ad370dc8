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

#include "permnm/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "permnm/error.hpp"

namespace permnm {

template <class T>
T assignment_objective(const Matrix<T>& score, const PermutationIndices& perm) {
  require(score.rows() == score.cols() && perm.size() == score.cols(),
          ErrorCode::shape_mismatch, "assignment_objective: size mismatch");
  T total{0};
  for (std::size_t j = 0; j < perm.size(); ++j) total += score(perm[j], j);
  return total;
}

namespace {

template <class T>
void require_square_finite(const Matrix<T>& score, const char* who) {
  require(score.rows() == score.cols(), ErrorCode::shape_mismatch,
          std::string(who) + ": input must be square, got " + std::to_string(score.rows()) +
              "x" + std::to_string(score.cols()));
  require(score.all_finite(), ErrorCode::non_finite, std::string(who) + ": non-finite entry");
}

}  // namespace

template <class T>
Assignment<T> solve_lsa(const Matrix<T>& score) {
  require_square_finite(score, "solve_lsa");
  const std::size_t n = score.rows();
  const double peak = static_cast<double>(*std::max_element(score.data().begin(), score.data().end()));
  auto cost = [&](std::size_t i, std::size_t j) {
    return peak - static_cast<double>(score(i, j));
  };

  // Potentials u (rows), v (columns); p[j] = row matched to column j, 1-based
  // with column 0 as the augmenting sentinel.
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  std::vector<double> minv(n + 1);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<std::size_t> perm(n);
  for (std::size_t j = 1; j <= n; ++j) perm[j - 1] = p[j] - 1;
  Assignment<T> out{PermutationIndices(std::move(perm)), T{0}};
  out.objective = assignment_objective(score, out.perm);
  return out;
}

template <class T>
Assignment<T> exhaustive_lsa(const Matrix<T>& score) {
  require_square_finite(score, "exhaustive_lsa");
  const std::size_t n = score.rows();
  require(n <= kExhaustiveLsaMaxN, ErrorCode::too_large,
          "exhaustive_lsa: refusing n = " + std::to_string(n) + " (limit " +
              std::to_string(kExhaustiveLsaMaxN) + ")");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::vector<std::size_t> best = perm;
  T best_value = -std::numeric_limits<T>::infinity();
  do {
    T total{0};
    for (std::size_t j = 0; j < n; ++j) total += score(perm[j], j);
    if (total > best_value) {
      best_value = total;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return {PermutationIndices(std::move(best)), best_value};
}

template <class T>
Matrix<T> dense_permutation(const PermutationIndices& perm) {
  Matrix<T> out(perm.size(), perm.size());
  for (std::size_t j = 0; j < perm.size(); ++j) out(perm[j], j) = T{1};
  return out;
}

template <class T>
PermutationIndices permutation_from_dense(const Matrix<T>& p) {
  require(p.rows() == p.cols(), ErrorCode::not_a_permutation,
          "permutation_from_dense: matrix is not square");
  std::vector<std::size_t> perm(p.cols(), p.rows());
  for (std::size_t j = 0; j < p.cols(); ++j) {
    for (std::size_t i = 0; i < p.rows(); ++i) {
      const T v = p(i, j);
      if (v == T{1}) {
        require(perm[j] == p.rows(), ErrorCode::not_a_permutation,
                "permutation_from_dense: column " + std::to_string(j) + " has several ones");
        perm[j] = i;
      } else {
        require(v == T{0}, ErrorCode::not_a_permutation,
                "permutation_from_dense: entry is neither 0 nor 1");
      }
    }
  }
  return PermutationIndices(std::move(perm));
}

#define PERMNM_INSTANTIATE(T)                                                      \
  template T assignment_objective(const Matrix<T>&, const PermutationIndices&);    \
  template Assignment<T> solve_lsa(const Matrix<T>&);                              \
  template Assignment<T> exhaustive_lsa(const Matrix<T>&);                         \
  template Matrix<T> dense_permutation(const PermutationIndices&);                 \
  template PermutationIndices permutation_from_dense(const Matrix<T>&);

PERMNM_INSTANTIATE(float)
PERMNM_INSTANTIATE(double)

#undef PERMNM_INSTANTIATE

}  // namespace permnm
