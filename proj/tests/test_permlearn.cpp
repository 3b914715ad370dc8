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
#include <cmath>
#include <numeric>

#include "permnm/assignment.hpp"
#include "permnm/error.hpp"
#include "permnm/fixtures.hpp"
#include "permnm/fold.hpp"
#include "permnm/layer_tape.hpp"
#include "permnm/reference.hpp"
#include "permnm/rng.hpp"
#include "test_util.hpp"

using namespace permnm;
using permnm::testing::error_code_of;

namespace {

Model<double> small_mlp(std::uint64_t seed) { return generate_mlp({16, 8, 4}, seed).cast<double>(); }
MatrixD small_calib(std::uint64_t seed) { return generate_calibration(48, 16, seed).cast<double>(); }

TrainConfig small_config(TrainMode mode) {
  TrainConfig t;
  t.block_size = 8;
  t.steps = 20;
  t.mode = mode;
  t.seed = 5;
  return t;
}

}  // namespace

TEST_CASE("parameter counts") {
  Rng rng(1);
  CHECK(init_params<double>(4096, 64, rng).parameter_count() == 262144);
  CHECK(init_params<double>(8, 8, rng).parameter_count() == 64);
  const auto ragged = init_params<double>(10, 4, rng);
  CHECK(ragged.layout.boundaries == std::vector<std::size_t>{0, 4, 8, 10});
  CHECK(ragged.parameter_count() == 16 + 16 + 4);
  const auto p = init_params<double>(16, 8, rng, 0.0);
  for (const auto& b : p.blocks) CHECK(b == MatrixD(8, 8));
}

TEST_CASE("block layouts") {
  CHECK(BlockLayout::uniform(16, 8).block_count() == 2);
  CHECK(BlockLayout::uniform(12, 8).size(1) == 4);
  CHECK(error_code_of([] { BlockLayout::uniform(12, 6).validate({2, 4}); }) ==
        ErrorCode::contract_violation);
  TrainConfig t;
  t.block_size = 64;
  CHECK(layer_layout(8, t, {2, 4}) == BlockLayout::uniform(8, 8));
  t.block_size = 6;
  CHECK(error_code_of([&] { layer_layout(12, t, {2, 4}); }) == ErrorCode::contract_violation);
}

TEST_CASE("block permutations assemble, split and stay confined") {
  Rng rng(2);
  const auto layout = BlockLayout::uniform(20, 8);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<PermutationIndices> locals;
    for (std::size_t b = 0; b < layout.block_count(); ++b) locals.push_back(rng.permutation(layout.size(b)));
    const auto global = assemble_block_permutation(layout, locals);
    CHECK(respects_blocks(global, layout));
    CHECK(split_block_permutation(layout, global) == locals);
  }
  CHECK_FALSE(respects_blocks(PermutationIndices({8, 1, 2, 3, 4, 5, 6, 7, 0, 9, 10, 11, 12, 13, 14,
                                                   15, 16, 17, 18, 19}),
                              layout));
}

TEST_CASE("cosine loss values") {
  const MatrixD y{{1, 2}, {3, 4}};
  CHECK(loss_cosine(y, y) == doctest::Approx(0.0));
  CHECK(loss_cosine(y, scale(y, -1.0)) == doctest::Approx(2.0));
  CHECK(loss_cosine(y, MatrixD{{2, 1}, {-3, -4}}) == doctest::Approx(1.1));
  // Zero target rows are left out; zero prediction rows count as 1.
  CHECK(loss_cosine(MatrixD{{1, 2}, {0, 0}}, MatrixD{{1, 2}, {5, 5}}) == doctest::Approx(0.0));
  CHECK(loss_cosine(MatrixD{{1, 2}, {1, 0}}, MatrixD{{1, 2}, {0, 0}}) == doctest::Approx(0.5));
  CHECK(loss_mse(y, MatrixD{{1, 2}, {3, 6}}) == doctest::Approx(1.0));

  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto a = rng.normal_matrix<double>(6, 5);
    const auto b = rng.normal_matrix<double>(6, 5);
    const double l = loss_cosine(a, b);
    CHECK(l >= 0.0);
    CHECK(l <= 2.0);
    CHECK(loss_cosine(scale(a, 3.5), scale(b, 0.25)) == doctest::Approx(l).epsilon(1e-12));
  }
}

TEST_CASE("cosine loss gradient matches finite differences") {
  Rng rng(4);
  const auto y = rng.normal_matrix<double>(5, 4);
  const auto yt = rng.normal_matrix<double>(5, 4);
  const auto grad = loss_cosine_grad(y, yt);
  const auto check = finite_diff_check<double>(
      [&](const Values<double>& v) { return loss_cosine(y, v[0]); }, {grad}, {yt}, 1e-6);
  CHECK(check.max_relative_error <= 1e-6);
}

TEST_CASE("effective weight maps the pruned weight back to input order") {
  Rng rng(5);
  const auto w = rng.normal_matrix<double>(4, 8);
  const auto x = rng.normal_matrix<double>(10, 8);
  const auto perm = rng.permutation(8);
  const auto mask = nm_mask(magnitude_scores(gather_columns(w, perm)), {2, 4});
  const auto eff = effective_weight(w, perm, mask);
  const auto direct = matmul_nt(gather_columns(x, perm), apply_mask(mask, gather_columns(w, perm)));
  CHECK(max_abs_diff(matmul_nt(x, eff), direct) <= 1e-12);
  const auto id = PermutationIndices::identity(8);
  const auto id_mask = nm_mask(magnitude_scores(w), {2, 4});
  CHECK(effective_weight(w, id, id_mask) == apply_mask(id_mask, w));
}

TEST_CASE("loss is invariant to reordering inside groups and of groups") {
  const auto problem = toy_layer(6);
  Rng rng(6);
  const auto base = rng.permutation(8);
  const double reference = evaluate_permutation(problem, base).loss;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::size_t> p(base.indices().begin(), base.indices().end());
    rng.shuffle(p.begin(), p.begin() + 4);
    rng.shuffle(p.begin() + 4, p.end());
    if (trial % 2) std::rotate(p.begin(), p.begin() + 4, p.end());
    CHECK(evaluate_permutation(problem, PermutationIndices(p)).loss ==
          doctest::Approx(reference).epsilon(1e-12));
  }
}

TEST_CASE("forward_sparse follows strongly peaked logits") {
  Rng rng(7);
  const auto problem = toy_layer(7);
  const auto perm = rng.permutation(8);
  BlockPermutationParams<double> params{problem.layout, {MatrixD(8, 8)}};
  for (std::size_t j = 0; j < 8; ++j) params.blocks[0](perm[j], j) = 5.0;
  const auto out = forward_sparse(problem.weight, problem.inputs, params, 0.5, 5, problem.nm,
                                  problem.scores);
  CHECK(out.perm == perm);
  const auto hard = evaluate_permutation(problem, perm);
  CHECK(out.mask.mask == hard.mask.mask);
  CHECK(max_abs_diff(out.y_tilde, hard.y_tilde) <= 1e-12);
  CHECK(max_abs_diff(out.y_tilde, matmul_nt(problem.inputs, out.effective_weight)) <= 1e-12);
  CHECK_FALSE(find_mask_violation(out.mask, problem.nm).has_value());
}

TEST_CASE("hard tape forward agrees with direct evaluation and yields finite gradients") {
  Rng rng(8);
  const auto problem = toy_layer(8);
  LayerTape<double> tape(problem, {});
  for (int trial = 0; trial < 10; ++trial) {
    const std::vector<MatrixD> blocks{rng.normal_matrix<double>(8, 8)};
    const auto out = tape.forward(blocks, 0.5);
    CHECK(out.loss == doctest::Approx(evaluate_permutation(problem, out.perm).loss).epsilon(1e-12));
    CHECK_FALSE(find_mask_violation(out.mask, problem.nm).has_value());
    const auto g = tape.backward();
    REQUIRE(g.size() == 1);
    CHECK(g[0].all_finite());
    CHECK(frobenius_norm(g[0]) > 0.0);
  }
}

TEST_CASE("soft surrogate gradient matches finite differences") {
  double worst = 0;
  for (int pt = 0; pt < 20; ++pt) {
    const auto problem = toy_layer(100 + pt, ImportanceMetric::wanda, 32);
    Rng rng(pt);
    const std::vector<MatrixD> blocks{rng.normal_matrix<double>(8, 8)};
    LayerTape<double> tape(problem, {true, true, 5});
    tape.forward(blocks, 1.0);
    worst = std::max(worst, finite_diff_check<double>(tape.tape(), blocks, 1e-5).max_relative_error);
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("score path gradient can be switched off") {
  const auto problem = toy_layer(9);
  Rng rng(9);
  const std::vector<MatrixD> blocks{rng.normal_matrix<double>(8, 8)};
  LayerTape<double> with(problem, {true, true, 5});
  LayerTape<double> without(problem, {true, false, 5});
  with.forward(blocks, 1.0);
  without.forward(blocks, 1.0);
  CHECK(max_abs_diff(with.backward()[0], without.backward()[0]) > 0.0);
  CHECK(finite_diff_check<double>(without.tape(), blocks, 1e-5).max_relative_error > 1e-4);
}

TEST_CASE("zero steps keeps the identity") {
  const auto problem = toy_layer(10);
  TrainConfig t;
  t.block_size = 8;
  t.steps = 0;
  Rng rng(10);
  const auto s = train_layer(problem, t, rng);
  CHECK(s.perm.is_identity());
  CHECK_FALSE(s.best_step.has_value());
  CHECK(s.achieved_loss == s.identity_loss);
  CHECK(s.loss_history.empty());
}

TEST_CASE("training tracks the best hardened permutation") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto problem = toy_layer(seed);
    TrainConfig t;
    t.block_size = 8;
    t.steps = 30;
    Rng rng(seed);
    const auto s = train_layer(problem, t, rng);
    CHECK(s.loss_history.size() == 31);
    CHECK(s.achieved_loss <= s.identity_loss);
    CHECK(s.achieved_loss <= *std::min_element(s.loss_history.begin(), s.loss_history.end()));
    CHECK(respects_blocks(s.perm, problem.layout));
    CHECK(evaluate_permutation(problem, s.perm).loss == doctest::Approx(s.achieved_loss));
    if (s.best_step) CHECK(s.loss_history[*s.best_step] == s.achieved_loss);
    CHECK_FALSE(find_mask_violation(s.mask, problem.nm).has_value());
  }
}

TEST_CASE("training is reproducible for a seed") {
  const auto problem = toy_layer(11);
  TrainConfig t;
  t.block_size = 8;
  Rng a(3), b(3);
  const auto s1 = train_layer(problem, t, a);
  const auto s2 = train_layer(problem, t, b);
  CHECK(s1.perm == s2.perm);
  CHECK(s1.loss_history == s2.loss_history);
}

TEST_CASE("toy layer regression against the exhaustive oracle") {
  // Frozen outcome of the default configuration on seeds 0..49.
  int le_heuristic = 0, within5 = 0, le_identity = 0;
  double gap = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto problem = toy_layer(seed);
    TrainConfig t;
    t.block_size = 8;
    t.steps = 50;
    Rng rng(seed);
    const auto s = train_layer(problem, t, rng);
    const auto oracle = oracle_best_partition(problem);
    const double g = (s.achieved_loss - oracle.best_loss) / oracle.best_loss;
    CHECK(g >= -1e-12);
    le_identity += s.achieved_loss <= s.identity_loss;
    le_heuristic += s.achieved_loss <= s.heuristic_cp_loss;
    within5 += g <= 0.05;
    gap += g;
  }
  CHECK(le_identity == 50);
  CHECK(le_heuristic == 34);
  CHECK(within5 == 31);
  CHECK(gap / 50 == doctest::Approx(0.058009).epsilon(1e-4));
}

TEST_CASE("mode parsing and resolution") {
  CHECK(parse_mode("layerwise") == TrainMode::layerwise);
  CHECK(parse_mode("endtoend") == TrainMode::endtoend);
  CHECK(parse_mode("automatic") == TrainMode::automatic);
  CHECK(parse_mode("auto") == TrainMode::automatic);
  CHECK(error_code_of([] { parse_mode("joint"); }) == ErrorCode::contract_violation);
  CHECK(resolve_mode(TrainMode::automatic, kAutomaticEndToEndLimit) == TrainMode::endtoend);
  CHECK(resolve_mode(TrainMode::automatic, kAutomaticEndToEndLimit + 1) == TrainMode::layerwise);
  CHECK(resolve_mode(TrainMode::layerwise, 10) == TrainMode::layerwise);
  TrainConfig bad;
  bad.learning_rate = 0;
  CHECK(error_code_of([&] { bad.validate(); }) == ErrorCode::contract_violation);
  bad = {};
  bad.tau_end = 2.0;
  CHECK(error_code_of([&] { bad.validate(); }) == ErrorCode::contract_violation);
}

TEST_CASE("whole-model training in both modes") {
  const auto model = small_mlp(12);
  const auto x = small_calib(13);
  for (const auto mode : {TrainMode::layerwise, TrainMode::endtoend}) {
    CAPTURE(to_string(mode));
    const auto r = train(model, x, small_config(mode), {2, 4});
    CHECK(r.mode == mode);
    CHECK_FALSE(r.diverged);
    REQUIRE(r.layers.size() == 2);
    for (const auto& s : r.layers) {
      CHECK(s.learned);
      CHECK(respects_blocks(s.perm, s.layout));
      CHECK_FALSE(find_mask_violation(s.mask, {2, 4}).has_value());
    }
    CHECK(r.layers[0].layer == "fc1");
    CHECK(r.layers[1].layout == BlockLayout::uniform(8, 8));
    if (mode == TrainMode::endtoend) {
      CHECK(r.model_loss <= r.model_identity_loss);
    } else {
      for (const auto& s : r.layers) CHECK(s.achieved_loss <= s.identity_loss);
    }
    CHECK(r.model_loss ==
          doctest::Approx(loss_cosine(model.forward(x), sparse_forward(model, r.layers, x))));
  }
}

TEST_CASE("layers outside the partial list take the heuristic permutation") {
  const auto model = small_mlp(14);
  const auto x = small_calib(15);
  auto config = small_config(TrainMode::layerwise);
  config.partial_layers = std::vector<std::string>{"fc2"};
  const auto r = train(model, x, config, {2, 4});
  CHECK_FALSE(r.layers[0].learned);
  CHECK(r.layers[1].learned);
  const auto problem = LayerProblem<double>::make(model.layers[0].weight, x, config.metric, {2, 4},
                                                  BlockLayout::uniform(16, 8));
  CHECK(r.layers[0].perm == heuristic_cp(problem.scores, problem.nm, problem.layout));
  config.partial_layers = std::vector<std::string>{"fc9"};
  CHECK(error_code_of([&] { train(model, x, config, {2, 4}); }).has_value());
}

TEST_CASE("folding the identity only applies the mask") {
  const auto model = small_mlp(16);
  std::vector<PermutationSolution<double>> solutions;
  for (const auto& layer : model.layers) {
    PermutationSolution<double> s;
    s.layer = layer.name;
    s.layout = BlockLayout::uniform(layer.c_in(), 8);
    s.perm = PermutationIndices::identity(layer.c_in());
    s.mask = nm_mask(magnitude_scores(layer.weight), {2, 4});
    solutions.push_back(s);
  }
  const auto folded = fold_and_export(model, solutions, {2, 4});
  CHECK(folded.input_gather.is_identity());
  for (std::size_t l = 0; l < 2; ++l)
    CHECK(folded.model.layers[l].weight == apply_mask(solutions[l].mask, model.layers[l].weight));
}

TEST_CASE("folded inference reproduces the sparse model") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto model = generate_mlp({16, 16, 8, 4}, seed).cast<double>();
    const auto x = generate_calibration(32, 16, seed + 100).cast<double>();
    auto config = small_config(TrainMode::layerwise);
    config.seed = seed;
    const auto r = train(model, x, config, {2, 4});
    const auto folded = fold_and_export(model, r.layers, {2, 4});
    const auto probe = generate_calibration(20, 16, seed + 200).cast<double>();
    CHECK(max_abs_diff(folded_forward(folded, probe), sparse_forward(model, r.layers, probe)) <= 1e-5);
    CHECK(folded.input_gather == r.layers[0].perm);
    for (std::size_t l = 0; l < folded.model.layers.size(); ++l) {
      const auto& w = folded.model.layers[l].weight;
      CHECK_FALSE(find_weight_violation(w, {2, 4}).has_value());
      CHECK(decompress_nm(folded.compressed[l]) == w.cast<float>());
      CHECK(folded.sidecar[l].first_layer_input_gather == (l == 0));
    }
  }
}

TEST_CASE("sidecar round trip") {
  const auto model = small_mlp(17);
  const auto r = train(model, small_calib(18), small_config(TrainMode::layerwise), {2, 4});
  const auto folded = fold_and_export(model, r.layers, {2, 4});
  const auto back = parse_sidecar_json(sidecar_json(folded.sidecar));
  REQUIRE(back.size() == folded.sidecar.size());
  for (std::size_t l = 0; l < back.size(); ++l) {
    CHECK(back[l].layer == folded.sidecar[l].layer);
    CHECK(back[l].block_boundaries == folded.sidecar[l].block_boundaries);
    CHECK(back[l].perm == folded.sidecar[l].perm);
    CHECK(back[l].first_layer_input_gather == folded.sidecar[l].first_layer_input_gather);
  }
  CHECK(error_code_of([] { parse_sidecar_json("{\"format\":\"other\"}"); }).has_value());
}

TEST_CASE("fold rejects inconsistent solutions") {
  const auto model = small_mlp(19);
  auto r = train(model, small_calib(20), small_config(TrainMode::layerwise), {2, 4});
  auto broken = r.layers;
  broken[0].mask.mask(0, 0) = 1 - broken[0].mask.mask(0, 0);
  CHECK(error_code_of([&] { fold_and_export(model, broken, {2, 4}); }) == ErrorCode::contract_violation);
  broken = r.layers;
  broken.pop_back();
  CHECK(error_code_of([&] { fold_and_export(model, broken, {2, 4}); }) == ErrorCode::shape_mismatch);
}
