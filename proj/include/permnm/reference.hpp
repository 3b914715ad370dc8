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

#include <cstdint>
#include <functional>
#include <span>

#include <boost/multiprecision/cpp_int.hpp>

#include "permnm/permlearn.hpp"
#include "permnm/sparsity.hpp"

namespace permnm {

using BigInt = boost::multiprecision::cpp_int;

// Number of ways to split c_in channels into c_in/m unordered groups of m:
// c_in! / ((m!)^G * G!), G = c_in / m. Exact.
BigInt count_partitions(std::size_t c_in, std::size_t m);

// Calls visit(arrangement) once per set partition of {0..n-1} into groups of
// m. arrangement lists the groups back to back, each in ascending order;
// groups are anchored by their smallest unplaced element, so no partition is
// produced twice and the sequence is lexicographic. Returns the count.
std::uint64_t enumerate_partitions(std::size_t n, std::size_t m,
                                   const std::function<void(std::span<const std::size_t>)>& visit);

// Handcrafted channel permutation maximizing retained importance inside each
// block: channels ranked by column score are dealt round-robin across the
// block's groups, then one refinement pass reassigns, for each slot position,
// the slot's channels across groups with a linear assignment over the
// retained-score gain. The identity arrangement is refined the same way and
// the better of the two is returned (identity on ties).
template <class T>
PermutationIndices heuristic_cp(const ImportanceScores<T>& scores, const NMConfig& nm,
                                const BlockLayout& layout);

template <class T>
struct PartitionOracleResult {
  // Channels laid out group by group (ascending inside a group).
  PermutationIndices best_grouping;
  T best_loss = T{0};
  std::uint64_t evaluated_count = 0;
};

inline constexpr std::uint64_t kOracleMaxCandidates = 10'000'000;

// Exhaustive search over block-respecting groupings for the minimum cosine
// loss of the pruned layer. The loss couples blocks, so the search runs over
// the product of the per-block partition sets; refuses (too_large) when that
// product exceeds max_candidates. Ties keep the first grouping in
// enumeration order.
template <class T>
PartitionOracleResult<T> oracle_best_partition(const LayerProblem<T>& problem,
                                               std::uint64_t max_candidates = kOracleMaxCandidates);

template <class T>
PartitionOracleResult<T> oracle_best_partition(const Matrix<T>& w, const Matrix<T>& x,
                                               ImportanceMetric metric, const NMConfig& nm,
                                               const BlockLayout& layout,
                                               std::uint64_t max_candidates = kOracleMaxCandidates);

}  // namespace permnm
