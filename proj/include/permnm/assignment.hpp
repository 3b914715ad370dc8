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

#include "permnm/matrix.hpp"
#include "permnm/permutation.hpp"
#include "permnm/sinkhorn.hpp"

namespace permnm {

template <class T>
struct Assignment {
  PermutationIndices perm;
  // sum_j score(perm[j], j), accumulated in j order.
  T objective = T{0};
};

template <class T>
T assignment_objective(const Matrix<T>& score, const PermutationIndices& perm);

// Hard permutation maximizing trace(P^T * score) via the O(n^3) Hungarian
// method, run as a minimization of (max_entry - score). Ties go to the
// lowest row index in scan order, so an all-equal input yields the identity.
template <class T>
Assignment<T> solve_lsa(const Matrix<T>& score);
template <class T>
Assignment<T> solve_lsa(const SoftPermutation<T>& p_hat) {
  return solve_lsa(p_hat.entries);
}

inline constexpr std::size_t kExhaustiveLsaMaxN = 10;

// Enumerates all n! permutations in lexicographic order and keeps the first
// strict maximizer. Refuses n > kExhaustiveLsaMaxN.
template <class T>
Assignment<T> exhaustive_lsa(const Matrix<T>& score);
template <class T>
Assignment<T> exhaustive_lsa(const SoftPermutation<T>& p_hat) {
  return exhaustive_lsa(p_hat.entries);
}

// Binary matrix with ones at (perm[j], j).
template <class T>
Matrix<T> dense_permutation(const PermutationIndices& perm);

// Inverse of dense_permutation; throws not_a_permutation for anything that
// is not exactly a 0/1 permutation matrix.
template <class T>
PermutationIndices permutation_from_dense(const Matrix<T>& p);

}  // namespace permnm
