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

#include "permnm/reference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "permnm/assignment.hpp"
#include "permnm/error.hpp"

namespace permnm {

namespace {

BigInt factorial(std::size_t n) {
  BigInt f = 1;
  for (std::size_t k = 2; k <= n; ++k) f *= k;
  return f;
}

struct PartitionWalker {
  std::size_t m;
  std::vector<bool> used;
  std::vector<std::size_t> arrangement;
  const std::function<void(std::span<const std::size_t>)>* visit;
  std::uint64_t count = 0;

  void place_group(std::size_t placed) {
    if (placed == used.size()) {
      ++count;
      (*visit)(arrangement);
      return;
    }
    std::size_t anchor = 0;
    while (used[anchor]) ++anchor;
    used[anchor] = true;
    arrangement.push_back(anchor);
    choose(anchor + 1, m - 1, placed + m);
    arrangement.pop_back();
    used[anchor] = false;
  }

  void choose(std::size_t from, std::size_t left, std::size_t placed_after) {
    if (left == 0) {
      place_group(placed_after);
      return;
    }
    for (std::size_t c = from; c < used.size(); ++c) {
      if (used[c]) continue;
      used[c] = true;
      arrangement.push_back(c);
      choose(c + 1, left - 1, placed_after);
      arrangement.pop_back();
      used[c] = false;
    }
  }
};

// Sum over rows of the `keep` largest scores among `members`.
template <class T>
T group_gain(const Matrix<T>& scores, std::span<const std::size_t> members, std::size_t keep,
             std::vector<T>& scratch) {
  T total{0};
  for (std::size_t r = 0; r < scores.rows(); ++r) {
    scratch.clear();
    for (std::size_t c : members) scratch.push_back(scores(r, c));
    std::partial_sort(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(keep),
                      scratch.end(), std::greater<T>());
    for (std::size_t k = 0; k < keep; ++k) total += scratch[k];
  }
  return total;
}

template <class T>
T arrangement_gain(const Matrix<T>& scores, const std::vector<std::size_t>& arrangement,
                   const NMConfig& nm) {
  std::vector<T> scratch;
  T total{0};
  for (std::size_t g = 0; g < arrangement.size(); g += nm.group)
    total += group_gain(scores, std::span(arrangement).subspan(g, nm.group), nm.keep(), scratch);
  return total;
}

// One pass: for every slot position, pull that slot's channel out of each
// group and put the pulled channels back by linear assignment on the gain.
template <class T>
void refine(const Matrix<T>& scores, std::vector<std::size_t>& arrangement, const NMConfig& nm) {
  const std::size_t groups = arrangement.size() / nm.group;
  if (groups < 2) return;
  std::vector<T> scratch;
  std::vector<std::size_t> members(nm.group);
  for (std::size_t slot = 0; slot < nm.group; ++slot) {
    Matrix<T> gain(groups, groups);
    for (std::size_t i = 0; i < groups; ++i) {
      const std::size_t channel = arrangement[i * nm.group + slot];
      for (std::size_t g = 0; g < groups; ++g) {
        for (std::size_t k = 0; k < nm.group; ++k) members[k] = arrangement[g * nm.group + k];
        members[slot] = channel;
        gain(i, g) = group_gain(scores, std::span<const std::size_t>(members), nm.keep(), scratch);
      }
    }
    const auto assignment = solve_lsa(gain);
    std::vector<std::size_t> pulled(groups);
    for (std::size_t i = 0; i < groups; ++i) pulled[i] = arrangement[i * nm.group + slot];
    for (std::size_t g = 0; g < groups; ++g)
      arrangement[g * nm.group + slot] = pulled[assignment.perm[g]];
  }
}

template <class T>
std::vector<std::size_t> heuristic_block(const Matrix<T>& scores, const NMConfig& nm) {
  const std::size_t n = scores.cols();
  const std::size_t groups = n / nm.group;
  std::vector<T> column(n, T{0});
  for (std::size_t r = 0; r < scores.rows(); ++r)
    for (std::size_t c = 0; c < n; ++c) column[c] += scores(r, c);
  std::vector<std::size_t> rank(n);
  std::iota(rank.begin(), rank.end(), 0);
  std::stable_sort(rank.begin(), rank.end(),
                   [&](std::size_t a, std::size_t b) { return column[a] > column[b]; });

  std::vector<std::size_t> dealt(n);
  std::vector<std::size_t> fill(groups, 0);
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t g = r % groups;
    dealt[g * nm.group + fill[g]++] = rank[r];
  }
  refine(scores, dealt, nm);

  std::vector<std::size_t> identity(n);
  std::iota(identity.begin(), identity.end(), 0);
  std::vector<std::size_t> best = identity;
  T best_gain = arrangement_gain(scores, identity, nm);
  std::vector<std::size_t> refined = identity;
  refine(scores, refined, nm);
  // Sums in a different order may differ by rounding; that is still a tie.
  const T slack = 64 * std::numeric_limits<T>::epsilon();
  for (const auto* candidate : {&refined, &dealt}) {
    const T g = arrangement_gain(scores, *candidate, nm);
    if (g > best_gain + slack * std::abs(best_gain)) {
      best_gain = g;
      best = *candidate;
    }
  }
  return best;
}

}  // namespace

BigInt count_partitions(std::size_t c_in, std::size_t m) {
  require(m > 0 && c_in % m == 0, ErrorCode::contract_violation,
          "count_partitions: group size must divide the channel count");
  const std::size_t groups = c_in / m;
  BigInt denom = 1;
  const BigInt fm = factorial(m);
  for (std::size_t g = 0; g < groups; ++g) denom *= fm;
  denom *= factorial(groups);
  return factorial(c_in) / denom;
}

std::uint64_t enumerate_partitions(std::size_t n, std::size_t m,
                                   const std::function<void(std::span<const std::size_t>)>& visit) {
  require(m > 0 && n > 0 && n % m == 0, ErrorCode::contract_violation,
          "enumerate_partitions: group size must divide n");
  PartitionWalker walker{m, std::vector<bool>(n, false), {}, &visit};
  walker.arrangement.reserve(n);
  walker.place_group(0);
  return walker.count;
}

template <class T>
PermutationIndices heuristic_cp(const ImportanceScores<T>& scores, const NMConfig& nm,
                                const BlockLayout& layout) {
  require(layout.c_in() == scores.scores.cols(), ErrorCode::shape_mismatch,
          "heuristic_cp: block layout does not cover the score columns");
  layout.validate(nm);
  std::vector<std::size_t> perm(layout.c_in());
  for (std::size_t b = 0; b < layout.block_count(); ++b) {
    const auto local =
        heuristic_block(column_block(scores.scores, layout.begin(b), layout.end(b)), nm);
    for (std::size_t j = 0; j < local.size(); ++j) perm[layout.begin(b) + j] = layout.begin(b) + local[j];
  }
  return PermutationIndices(std::move(perm));
}

template <class T>
PartitionOracleResult<T> oracle_best_partition(const LayerProblem<T>& problem,
                                               std::uint64_t max_candidates) {
  const auto& layout = problem.layout;
  layout.validate(problem.nm);
  BigInt total = 1;
  for (std::size_t b = 0; b < layout.block_count(); ++b)
    total *= count_partitions(layout.size(b), problem.nm.group);
  require(total <= max_candidates, ErrorCode::too_large,
          "oracle: " + total.str() + " candidate groupings exceed the limit of " +
              std::to_string(max_candidates));

  // All blocks but the last are materialized; the last is streamed.
  const std::size_t blocks = layout.block_count();
  std::vector<std::vector<std::size_t>> stored(blocks ? blocks - 1 : 0);
  for (std::size_t b = 0; b + 1 < blocks; ++b) {
    enumerate_partitions(layout.size(b), problem.nm.group, [&](std::span<const std::size_t> a) {
      stored[b].insert(stored[b].end(), a.begin(), a.end());
    });
  }

  PartitionOracleResult<T> result;
  bool have = false;
  std::vector<std::size_t> perm(layout.c_in());
  std::vector<std::size_t> choice(blocks - 1, 0);
  auto place = [&](std::size_t b, std::span<const std::size_t> local) {
    for (std::size_t j = 0; j < local.size(); ++j) perm[layout.begin(b) + j] = layout.begin(b) + local[j];
  };

  const std::size_t last = blocks - 1;
  for (;;) {
    for (std::size_t b = 0; b < last; ++b) {
      const std::size_t width = layout.size(b);
      place(b, std::span(stored[b]).subspan(choice[b] * width, width));
    }
    enumerate_partitions(layout.size(last), problem.nm.group, [&](std::span<const std::size_t> a) {
      place(last, a);
      PermutationIndices candidate(perm);
      const T loss = evaluate_permutation(problem, candidate).loss;
      ++result.evaluated_count;
      if (!have || loss < result.best_loss) {
        have = true;
        result.best_loss = loss;
        result.best_grouping = std::move(candidate);
      }
    });
    // Odometer over the stored blocks, last stored block fastest.
    bool wrapped = true;
    for (std::size_t b = last; b-- > 0;) {
      if (++choice[b] * layout.size(b) < stored[b].size()) {
        wrapped = false;
        break;
      }
      choice[b] = 0;
    }
    if (wrapped) break;
  }
  return result;
}

template <class T>
PartitionOracleResult<T> oracle_best_partition(const Matrix<T>& w, const Matrix<T>& x,
                                               ImportanceMetric metric, const NMConfig& nm,
                                               const BlockLayout& layout,
                                               std::uint64_t max_candidates) {
  return oracle_best_partition(LayerProblem<T>::make(w, x, metric, nm, layout), max_candidates);
}

#define PERMNM_INSTANTIATE(T)                                                                     \
  template PermutationIndices heuristic_cp(const ImportanceScores<T>&, const NMConfig&,           \
                                           const BlockLayout&);                                   \
  template PartitionOracleResult<T> oracle_best_partition(const LayerProblem<T>&, std::uint64_t); \
  template PartitionOracleResult<T> oracle_best_partition(const Matrix<T>&, const Matrix<T>&,     \
                                                          ImportanceMetric, const NMConfig&,      \
                                                          const BlockLayout&, std::uint64_t);

PERMNM_INSTANTIATE(float)
PERMNM_INSTANTIATE(double)

#undef PERMNM_INSTANTIATE

}  // namespace permnm
