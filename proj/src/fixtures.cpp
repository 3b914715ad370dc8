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

#include "permnm/fixtures.hpp"

#include <cmath>

#include "permnm/error.hpp"
#include "permnm/reference.hpp"
#include "permnm/rng.hpp"

namespace permnm {

Model<float> generate_mlp(const std::vector<std::size_t>& dims, std::uint64_t seed) {
  require(dims.size() >= 2, ErrorCode::contract_violation, "generate_mlp: need at least two dims");
  Rng rng(seed);
  Model<float> model;
  for (std::size_t i = 1; i < dims.size(); ++i) {
    Layer<float> layer;
    layer.name = "fc" + std::to_string(i);
    layer.weight = rng.normal_matrix<float>(dims[i], dims[i - 1],
                                            1.0 / std::sqrt(static_cast<double>(dims[i - 1])));
    layer.input = i == 1 ? std::string(kModelInput) : model.layers.back().name;
    layer.activation = i + 1 < dims.size() ? Activation::relu : Activation::none;
    model.layers.push_back(std::move(layer));
  }
  model.validate();
  return model;
}

Matrix<float> generate_calibration(std::size_t samples, std::size_t features, std::uint64_t seed) {
  require(samples > 0 && features > 0, ErrorCode::contract_violation,
          "generate_calibration: sizes must be positive");
  Rng rng(seed);
  return rng.normal_matrix<float>(samples, features);
}

LayerProblem<double> toy_layer(std::uint64_t seed, ImportanceMetric metric, std::size_t samples) {
  Rng rng(seed);
  auto w = rng.normal_matrix<double>(4, 8);
  auto x = rng.normal_matrix<double>(samples, 8);
  return LayerProblem<double>::make(std::move(w), std::move(x), metric, NMConfig{2, 4},
                                    BlockLayout::uniform(8, 8));
}

ScoreTrapInstance evaluate_score_trap(const Model<float>& model, const Matrix<float>& calibration) {
  require(model.layers.size() == 1, ErrorCode::contract_violation,
          "score trap instance must have exactly one layer");
  const NMConfig nm{2, 4};
  const auto w = model.layers[0].weight.cast<double>();
  const auto x = calibration.cast<double>();
  const auto problem = LayerProblem<double>::make(w, x, ImportanceMetric::magnitude, nm,
                                                  BlockLayout::uniform(w.cols(), w.cols()));
  const auto identity = evaluate_permutation(problem, PermutationIndices::identity(w.cols()));
  const auto heuristic =
      evaluate_permutation(problem, heuristic_cp(problem.scores, nm, problem.layout));
  ScoreTrapInstance out;
  out.model = model;
  out.calibration = calibration;
  out.identity_retained = identity.retained;
  out.heuristic_retained = heuristic.retained;
  out.identity_mse = loss_mse(problem.target, identity.y_tilde);
  out.heuristic_mse = loss_mse(problem.target, heuristic.y_tilde);
  out.identity_loss = identity.loss;
  out.heuristic_loss = heuristic.loss;
  return out;
}

ScoreTrapInstance search_score_trap(std::uint64_t seed, std::size_t samples, std::size_t max_trials) {
  Rng root(seed);
  for (std::uint64_t trial = 0; trial < max_trials; ++trial) {
    Rng rng = root.split(trial);
    Model<float> model;
    model.layers.push_back({"fc", rng.normal_matrix<float>(4, 8), std::string(kModelInput),
                            Activation::none});
    const auto x = rng.normal_matrix<float>(samples, 8);
    auto inst = evaluate_score_trap(model, x);
    // Margins keep the phenomenon visible in single precision too.
    const bool more_score = inst.heuristic_retained > inst.identity_retained * 1.01;
    const bool worse_mse = inst.heuristic_mse > inst.identity_mse * 1.01;
    const bool worse_loss = inst.heuristic_loss > inst.identity_loss * 1.01;
    if (more_score && worse_mse && worse_loss) {
      inst.trial = trial;
      return inst;
    }
  }
  fail(ErrorCode::too_large, "score trap search: no instance within " + std::to_string(max_trials) +
                                 " trials");
}

}  // namespace permnm
