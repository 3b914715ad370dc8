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

#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "permnm/error.hpp"
#include "permnm/fixtures.hpp"
#include "permnm/reference.hpp"
#include "permnm/rng.hpp"
#include "test_util.hpp"

using namespace permnm;
using permnm::testing::error_code_of;

namespace {

// Max retained score over every grouping of one block, by enumeration.
double exhaustive_retained(const ImportanceScores<double>& s, const NMConfig& nm) {
  double best = 0;
  enumerate_partitions(s.scores.cols(), nm.group, [&](std::span<const std::size_t> arr) {
    const PermutationIndices perm(std::vector<std::size_t>(arr.begin(), arr.end()));
    const ImportanceScores<double> permuted(gather_columns(s.scores, perm));
    best = std::max(best, retained_score(permuted, nm_mask(permuted, nm)));
  });
  return best;
}

double retained_of(const ImportanceScores<double>& s, const NMConfig& nm,
                   const PermutationIndices& perm) {
  const ImportanceScores<double> permuted(gather_columns(s.scores, perm));
  return retained_score(permuted, nm_mask(permuted, nm));
}

}  // namespace

TEST_CASE("partition counts") {
  CHECK(count_partitions(4, 4) == 1);
  CHECK(count_partitions(8, 4) == 35);
  CHECK(count_partitions(12, 4) == 5775);
  CHECK(count_partitions(16, 4) == 2627625);
  CHECK(count_partitions(6, 2) == 15);
  // 64 channels in groups of 4 overflows 64 bits by far.
  CHECK(count_partitions(64, 4) > BigInt(std::numeric_limits<std::uint64_t>::max()));
  CHECK(error_code_of([] { count_partitions(10, 4); }) == ErrorCode::contract_violation);
}

TEST_CASE("enumeration visits each partition exactly once") {
  for (auto [n, m] : {std::pair<std::size_t, std::size_t>{8, 4}, {12, 4}, {6, 2}, {4, 4}}) {
    std::set<std::vector<std::vector<std::size_t>>> seen;
    std::vector<std::size_t> prev;
    const auto count = enumerate_partitions(n, m, [&](std::span<const std::size_t> arr) {
      std::vector<std::size_t> flat(arr.begin(), arr.end());
      CHECK(is_bijection(flat));
      CHECK(flat > prev);
      prev = flat;
      std::vector<std::vector<std::size_t>> groups;
      for (std::size_t g = 0; g < n / m; ++g) {
        std::vector<std::size_t> grp(flat.begin() + g * m, flat.begin() + (g + 1) * m);
        CHECK(std::is_sorted(grp.begin(), grp.end()));
        groups.push_back(grp);
      }
      std::sort(groups.begin(), groups.end());
      seen.insert(groups);
    });
    CHECK(BigInt(count) == count_partitions(n, m));
    CHECK(seen.size() == count);
  }
}

TEST_CASE("heuristic reaches the best grouping on a descending row") {
  const ImportanceScores<double> s(MatrixD{{8, 7, 6, 5, 4, 3, 2, 1}});
  const NMConfig nm{2, 4};
  const auto layout = BlockLayout::uniform(8, 8);
  CHECK(retained_of(s, nm, PermutationIndices::identity(8)) == 22.0);
  const auto perm = heuristic_cp(s, nm, layout);
  const double h = retained_of(s, nm, perm);
  CHECK(h >= 22.0);
  CHECK(h == exhaustive_retained(s, nm));
  CHECK(h == 26.0);
}

TEST_CASE("heuristic keeps the identity on uniform scores") {
  const ImportanceScores<double> s(MatrixD(4, 16, 1.0));
  CHECK(heuristic_cp(s, {2, 4}, BlockLayout::uniform(16, 8)).is_identity());
}

TEST_CASE("heuristic never loses retained score to the identity") {
  Rng rng(41);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t blocks = 1 + rng.below(3);
    const auto s = magnitude_scores(rng.normal_matrix<double>(1 + rng.below(6), 8 * blocks));
    const auto layout = BlockLayout::uniform(8 * blocks, 8);
    const auto perm = heuristic_cp(s, {2, 4}, layout);
    CHECK(respects_blocks(perm, layout));
    CHECK(retained_of(s, {2, 4}, perm) >= retained_of(s, {2, 4}, PermutationIndices::identity(perm.size())));
  }
}

TEST_CASE("heuristic is close to the exhaustive maximum on small blocks") {
  Rng rng(42);
  int optimal = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto s = magnitude_scores(rng.normal_matrix<double>(4, 8));
    const double h = retained_of(s, {2, 4}, heuristic_cp(s, {2, 4}, BlockLayout::uniform(8, 8)));
    const double best = exhaustive_retained(s, {2, 4});
    CHECK(h <= best + 1e-12);
    CHECK(h >= 0.95 * best);
    optimal += h >= best - 1e-12 ? 1 : 0;
  }
  CHECK(optimal >= 50);
}

TEST_CASE("oracle on the toy layer") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto problem = toy_layer(seed);
    const auto r = oracle_best_partition(problem);
    CHECK(r.evaluated_count == 35);
    CHECK(r.best_loss <= evaluate_permutation(problem, PermutationIndices::identity(8)).loss);
    CHECK(r.best_loss <=
          evaluate_permutation(problem, heuristic_cp(problem.scores, problem.nm, problem.layout)).loss);
    CHECK(evaluate_permutation(problem, r.best_grouping).loss == doctest::Approx(r.best_loss));
  }
}

TEST_CASE("oracle equals the minimum over all channel orders") {
  // Independent check: every one of the 8! orders, not just the partitions.
  const auto problem = toy_layer(3, ImportanceMetric::wanda, 32);
  std::vector<std::size_t> order(8);
  std::iota(order.begin(), order.end(), 0);
  double best = 1e300;
  do {
    best = std::min(best, evaluate_permutation(problem, PermutationIndices(order)).loss);
  } while (std::next_permutation(order.begin(), order.end()));
  CHECK(oracle_best_partition(problem).best_loss == doctest::Approx(best).epsilon(1e-12));
}

TEST_CASE("oracle spans several blocks jointly") {
  Rng rng(43);
  const auto w = rng.normal_matrix<double>(3, 16);
  const auto x = rng.normal_matrix<double>(20, 16);
  const auto r = oracle_best_partition(w, x, ImportanceMetric::magnitude, {2, 4},
                                       BlockLayout::uniform(16, 8));
  CHECK(r.evaluated_count == 35 * 35);
  CHECK(respects_blocks(r.best_grouping, BlockLayout::uniform(16, 8)));
}

TEST_CASE("oracle with one group per block has a single candidate") {
  const auto problem = LayerProblem<double>::make(MatrixD{{1, -2, 3, 0.5, 2, 1, -1, 4}},
                                                  MatrixD{{1, 1, 1, 1, 1, 1, 1, 1}},
                                                  ImportanceMetric::magnitude, {2, 4},
                                                  BlockLayout::uniform(8, 4));
  const auto r = oracle_best_partition(problem);
  CHECK(r.evaluated_count == 1);
  CHECK(r.best_grouping.is_identity());
}

TEST_CASE("oracle refuses oversized searches") {
  Rng rng(44);
  const auto w = rng.normal_matrix<double>(2, 16);
  const auto x = rng.normal_matrix<double>(4, 16);
  CHECK(error_code_of([&] {
          oracle_best_partition(w, x, ImportanceMetric::magnitude, {2, 4},
                                BlockLayout::uniform(16, 16), 1000);
        }) == ErrorCode::too_large);
  CHECK(error_code_of([&] {
          oracle_best_partition(w, x, ImportanceMetric::magnitude, {2, 4},
                                BlockLayout::uniform(16, 8), 35 * 35 - 1);
        }) == ErrorCode::too_large);
}
