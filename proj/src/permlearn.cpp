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

#include "permnm/permlearn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "permnm/assignment.hpp"
#include "permnm/error.hpp"
#include "permnm/layer_tape.hpp"
#include "permnm/parallel.hpp"
#include "permnm/reference.hpp"

namespace permnm {

// ---- blocks ---------------------------------------------------------------

BlockLayout BlockLayout::uniform(std::size_t c_in, std::size_t block_size) {
  require(c_in > 0 && block_size > 0, ErrorCode::contract_violation,
          "block layout: sizes must be positive");
  require(block_size <= c_in, ErrorCode::contract_violation,
          "block layout: block size " + std::to_string(block_size) + " exceeds C_in " +
              std::to_string(c_in));
  BlockLayout layout;
  for (std::size_t b = 0; b < c_in; b += block_size) layout.boundaries.push_back(b);
  layout.boundaries.push_back(c_in);
  return layout;
}

void BlockLayout::validate(const NMConfig& nm) const {
  nm.validate();
  require(boundaries.size() >= 2 && boundaries.front() == 0, ErrorCode::contract_violation,
          "block layout must start at 0 and hold at least one block");
  for (std::size_t b = 0; b < block_count(); ++b) {
    require(end(b) > begin(b), ErrorCode::contract_violation, "block layout: empty block");
    require(size(b) % nm.group == 0, ErrorCode::contract_violation,
            "group width " + std::to_string(nm.group) + " must divide block size " +
                std::to_string(size(b)) + " (block " + std::to_string(b) + ")");
  }
}

template <class T>
std::size_t BlockPermutationParams<T>::parameter_count() const {
  std::size_t total = 0;
  for (const auto& b : blocks) total += b.size();
  return total;
}

namespace {

template <class T>
BlockPermutationParams<T> init_for_layout(const BlockLayout& layout, Rng& rng, double stddev) {
  BlockPermutationParams<T> params{layout, {}};
  for (std::size_t b = 0; b < layout.block_count(); ++b)
    params.blocks.push_back(rng.normal_matrix<T>(layout.size(b), layout.size(b), stddev));
  return params;
}

}  // namespace

template <class T>
BlockPermutationParams<T> init_params(std::size_t c_in, std::size_t block_size, Rng& rng,
                                      double stddev) {
  return init_for_layout<T>(BlockLayout::uniform(c_in, block_size), rng, stddev);
}

PermutationIndices assemble_block_permutation(const BlockLayout& layout,
                                              const std::vector<PermutationIndices>& blocks) {
  require(blocks.size() == layout.block_count(), ErrorCode::shape_mismatch,
          "assemble_block_permutation: block count mismatch");
  std::vector<std::size_t> perm(layout.c_in());
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    require(blocks[b].size() == layout.size(b), ErrorCode::shape_mismatch,
            "assemble_block_permutation: block " + std::to_string(b) + " has the wrong size");
    for (std::size_t j = 0; j < blocks[b].size(); ++j)
      perm[layout.begin(b) + j] = layout.begin(b) + blocks[b][j];
  }
  return PermutationIndices(std::move(perm));
}

std::vector<PermutationIndices> split_block_permutation(const BlockLayout& layout,
                                                        const PermutationIndices& perm) {
  require(respects_blocks(perm, layout), ErrorCode::contract_violation,
          "permutation crosses block boundaries");
  std::vector<PermutationIndices> out;
  for (std::size_t b = 0; b < layout.block_count(); ++b) {
    std::vector<std::size_t> local(layout.size(b));
    for (std::size_t j = 0; j < local.size(); ++j) local[j] = perm[layout.begin(b) + j] - layout.begin(b);
    out.emplace_back(std::move(local));
  }
  return out;
}

bool respects_blocks(const PermutationIndices& perm, const BlockLayout& layout) {
  if (perm.size() != layout.c_in()) return false;
  for (std::size_t b = 0; b < layout.block_count(); ++b)
    for (std::size_t j = layout.begin(b); j < layout.end(b); ++j)
      if (perm[j] < layout.begin(b) || perm[j] >= layout.end(b)) return false;
  return true;
}

// ---- losses -----------------------------------------------------------------

namespace {

template <class T>
void require_loss_shapes(const Matrix<T>& y, const Matrix<T>& y_tilde) {
  require(y.same_shape(y_tilde), ErrorCode::shape_mismatch,
          "cosine loss: output shapes differ");
}

template <class T>
T row_norm(std::span<const T> r) {
  T acc{0};
  for (T v : r) acc += v * v;
  return std::sqrt(acc);
}

}  // namespace

template <class T>
T loss_cosine(const Matrix<T>& y, const Matrix<T>& y_tilde) {
  require_loss_shapes(y, y_tilde);
  T total{0};
  std::size_t used = 0;
  for (std::size_t r = 0; r < y.rows(); ++r) {
    const auto a = y.row(r);
    const auto b = y_tilde.row(r);
    const T na = row_norm(a);
    if (na == T{0}) continue;
    ++used;
    const T nb = row_norm(b);
    if (nb == T{0}) {
      total += T{1};
      continue;
    }
    T dot{0};
    for (std::size_t c = 0; c < a.size(); ++c) dot += a[c] * b[c];
    total += std::clamp(T{1} - dot / (na * nb), T{0}, T{2});
  }
  require(used > 0, ErrorCode::contract_violation,
          "cosine loss: the reference output has no nonzero row");
  return total / static_cast<T>(used);
}

template <class T>
Matrix<T> loss_cosine_grad(const Matrix<T>& y, const Matrix<T>& y_tilde) {
  require_loss_shapes(y, y_tilde);
  Matrix<T> grad(y.rows(), y.cols());
  std::size_t used = 0;
  for (std::size_t r = 0; r < y.rows(); ++r) used += row_norm(y.row(r)) > T{0} ? 1 : 0;
  require(used > 0, ErrorCode::contract_violation,
          "cosine loss: the reference output has no nonzero row");
  const T inv_rows = T{1} / static_cast<T>(used);
  for (std::size_t r = 0; r < y.rows(); ++r) {
    const auto a = y.row(r);
    const auto b = y_tilde.row(r);
    const T na = row_norm(a);
    const T nb = row_norm(b);
    if (na == T{0} || nb == T{0}) continue;
    T dot{0};
    for (std::size_t c = 0; c < a.size(); ++c) dot += a[c] * b[c];
    const T cosine = dot / (na * nb);
    auto g = grad.row(r);
    for (std::size_t c = 0; c < a.size(); ++c)
      g[c] = -inv_rows * (a[c] / (na * nb) - cosine * b[c] / (nb * nb));
  }
  return grad;
}

template <class T>
T loss_mse(const Matrix<T>& y, const Matrix<T>& y_tilde) {
  require_loss_shapes(y, y_tilde);
  T acc{0};
  for (std::size_t i = 0; i < y.size(); ++i) {
    const T d = y.data()[i] - y_tilde.data()[i];
    acc += d * d;
  }
  return acc / static_cast<T>(y.size());
}

// ---- one layer ----------------------------------------------------------------

template <class T>
LayerProblem<T> LayerProblem<T>::make(Matrix<T> weight, Matrix<T> inputs, ImportanceMetric metric,
                                      const NMConfig& nm, const BlockLayout& layout) {
  require(inputs.cols() == weight.cols(), ErrorCode::shape_mismatch,
          "layer problem: inputs have " + std::to_string(inputs.cols()) +
              " features, weight expects " + std::to_string(weight.cols()));
  require(layout.c_in() == weight.cols(), ErrorCode::shape_mismatch,
          "layer problem: block layout does not cover C_in");
  layout.validate(nm);
  require_group_divides(weight.cols(), nm, "layer problem");
  LayerProblem p;
  p.scores = score_function<T>(metric)(weight, inputs);
  p.target = matmul_nt(inputs, weight);
  p.weight = std::move(weight);
  p.inputs = std::move(inputs);
  p.nm = nm;
  p.layout = layout;
  return p;
}

template <class T>
Matrix<T> effective_weight(const Matrix<T>& weight, const PermutationIndices& perm,
                           const SparsityMask<T>& permuted_mask) {
  require(permuted_mask.mask.same_shape(weight) && perm.size() == weight.cols(),
          ErrorCode::shape_mismatch, "effective_weight: shape mismatch");
  // Column j of the permuted layer is original column perm[j].
  Matrix<T> out(weight.rows(), weight.cols());
  for (std::size_t i = 0; i < weight.rows(); ++i)
    for (std::size_t j = 0; j < weight.cols(); ++j)
      out(i, perm[j]) = permuted_mask.mask(i, j) * weight(i, perm[j]);
  return out;
}

template <class T>
HardEvaluation<T> evaluate_permutation(const LayerProblem<T>& problem,
                                       const PermutationIndices& perm) {
  HardEvaluation<T> ev;
  ev.perm = perm;
  const ImportanceScores<T> permuted(gather_columns(problem.scores.scores, perm));
  ev.mask = nm_mask(permuted, problem.nm);
#ifndef NDEBUG
  require(!find_mask_violation(ev.mask, problem.nm), ErrorCode::contract_violation,
          "evaluate_permutation: mask violates the N:M group counts");
#endif
  ev.retained = retained_score(permuted, ev.mask);
  ev.y_tilde = matmul_nt(problem.inputs, effective_weight(problem.weight, perm, ev.mask));
  ev.loss = loss_cosine(problem.target, ev.y_tilde);
  return ev;
}

template <class T>
SparseForward<T> forward_sparse(const Matrix<T>& w, const Matrix<T>& x,
                                const BlockPermutationParams<T>& params, T tau,
                                std::size_t sinkhorn_iters, const NMConfig& nm,
                                const ImportanceScores<T>& scores) {
  require(x.cols() == w.cols() && scores.scores.same_shape(w) &&
              params.layout.c_in() == w.cols() &&
              params.blocks.size() == params.layout.block_count(),
          ErrorCode::shape_mismatch, "forward_sparse: shapes do not compose");
  params.layout.validate(nm);
  std::vector<PermutationIndices> local;
  for (const auto& block : params.blocks)
    local.push_back(solve_lsa(soft_permutation(block, tau, sinkhorn_iters)).perm);
  SparseForward<T> out;
  out.perm = assemble_block_permutation(params.layout, local);
  out.mask = nm_mask(ImportanceScores<T>(gather_columns(scores.scores, out.perm)), nm);
  out.effective_weight = effective_weight(w, out.perm, out.mask);
  out.y_tilde = matmul_nt(x, out.effective_weight);
  return out;
}

// ---- configuration ------------------------------------------------------------

std::string_view to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::layerwise: return "layerwise";
    case TrainMode::endtoend: return "endtoend";
    case TrainMode::automatic: return "automatic";
  }
  return "unknown";
}

TrainMode parse_mode(std::string_view text) {
  if (text == "layerwise") return TrainMode::layerwise;
  if (text == "endtoend") return TrainMode::endtoend;
  if (text == "automatic" || text == "auto") return TrainMode::automatic;
  fail(ErrorCode::contract_violation, "unknown training mode '" + std::string(text) + "'");
}

TrainMode resolve_mode(TrainMode mode, std::size_t total_weights) {
  if (mode != TrainMode::automatic) return mode;
  return total_weights <= kAutomaticEndToEndLimit ? TrainMode::endtoend : TrainMode::layerwise;
}

AdamWConfig TrainConfig::optimizer() const {
  AdamWConfig cfg;
  cfg.learning_rate = learning_rate;
  return cfg;
}

TemperatureSchedule TrainConfig::schedule() const {
  // tau reaches tau_end on the last optimizer step.
  return {tau_start, tau_end, std::max<std::size_t>(steps, 2) - 1};
}

void TrainConfig::validate() const {
  require(learning_rate > 0.0 && std::isfinite(learning_rate), ErrorCode::contract_violation,
          "learning rate must be positive");
  require(block_size > 0, ErrorCode::contract_violation, "block size must be positive");
  require(init_stddev >= 0.0 && gumbel_noise >= 0.0, ErrorCode::contract_violation,
          "noise scales must be non-negative");
  schedule().validate();
}

BlockLayout layer_layout(std::size_t c_in, const TrainConfig& config, const NMConfig& nm) {
  auto layout = BlockLayout::uniform(c_in, std::min(config.block_size, c_in));
  layout.validate(nm);
  return layout;
}

// ---- training -------------------------------------------------------------------

namespace {

template <class T>
Values<T> gumbel_offsets(const std::vector<Matrix<T>>& blocks, double scale, Rng& rng) {
  if (scale <= 0.0) return {};
  Values<T> noise;
  for (const auto& b : blocks) {
    Matrix<T> g(b.rows(), b.cols());
    for (T& v : g.data()) v = static_cast<T>(scale * rng.gumbel());
    noise.push_back(std::move(g));
  }
  return noise;
}

template <class T>
void check_mask_in_debug(const SparsityMask<T>& mask, const NMConfig& nm) {
#ifndef NDEBUG
  require(!find_mask_violation(mask, nm), ErrorCode::contract_violation,
          "training step produced a mask that violates the N:M group counts");
#else
  (void)mask;
  (void)nm;
#endif
}

template <class T>
PermutationSolution<T> baseline_solution(const std::string& name, const LayerProblem<T>& problem) {
  const auto identity = evaluate_permutation(problem, PermutationIndices::identity(problem.layout.c_in()));
  const auto heuristic =
      evaluate_permutation(problem, heuristic_cp(problem.scores, problem.nm, problem.layout));
  PermutationSolution<T> s;
  s.layer = name;
  s.layout = problem.layout;
  s.perm = identity.perm;
  s.mask = identity.mask;
  s.achieved_loss = identity.loss;
  s.retained_score = identity.retained;
  s.identity_loss = identity.loss;
  s.identity_retained = identity.retained;
  s.heuristic_cp_loss = heuristic.loss;
  s.heuristic_cp_retained = heuristic.retained;
  return s;
}

template <class T>
void adopt(PermutationSolution<T>& s, const HardEvaluation<T>& ev) {
  s.perm = ev.perm;
  s.mask = ev.mask;
  s.achieved_loss = ev.loss;
  s.retained_score = ev.retained;
}

}  // namespace

template <class T>
PermutationSolution<T> train_layer(const LayerProblem<T>& problem, const TrainConfig& config,
                                   Rng& rng, std::string* diagnostic) {
  config.validate();
  auto solution = baseline_solution<T>("", problem);
  auto params = init_for_layout<T>(problem.layout, rng, config.init_stddev);
  auto state = AdamWState<T>::zeros_like(params.blocks);
  const auto schedule = config.schedule();
  LayerTape<T> tape(problem, {false, config.score_path_gradient, config.sinkhorn_iters});

  auto consider = [&](const typename LayerTape<T>::Output& out, std::size_t step) {
    check_mask_in_debug(out.mask, problem.nm);
    solution.loss_history.push_back(out.loss);
    if (out.loss < solution.achieved_loss) {
      solution.perm = out.perm;
      solution.mask = out.mask;
      solution.achieved_loss = out.loss;
      solution.retained_score =
          retained_score(ImportanceScores<T>(gather_columns(problem.scores.scores, out.perm)), out.mask);
      solution.best_step = step;
    }
  };

  for (std::size_t step = 0; step <= config.steps && config.steps > 0; ++step) {
    const T tau = static_cast<T>(tau_at(schedule, std::min(step, schedule.total_steps)));
    const auto noise = gumbel_offsets(params.blocks, config.gumbel_noise, rng);
    const auto out = tape.forward(params.blocks, tau, noise);
    if (!std::isfinite(out.loss)) {
      if (diagnostic) *diagnostic = "non-finite loss at step " + std::to_string(step);
      break;
    }
    consider(out, step);
    if (step == config.steps) break;  // final evaluation of the last update
    const auto grads = tape.backward();
    try {
      adamw_step(params.blocks, grads, state, config.optimizer());
    } catch (const Error& e) {
      if (e.code() != ErrorCode::non_finite) throw;
      if (diagnostic) *diagnostic = "step " + std::to_string(step) + ": " + e.what();
      break;
    }
  }
  return solution;
}

namespace {

template <class T>
std::vector<Matrix<T>> effective_weights(const std::vector<LayerProblem<T>>& problems,
                                         const std::vector<PermutationIndices>& perms) {
  std::vector<Matrix<T>> out;
  for (std::size_t l = 0; l < problems.size(); ++l) {
    const auto mask = nm_mask(ImportanceScores<T>(gather_columns(problems[l].scores.scores, perms[l])),
                              problems[l].nm);
    out.push_back(effective_weight(problems[l].weight, perms[l], mask));
  }
  return out;
}

template <class T>
Matrix<T> sparse_model_output(const Model<T>& model, const std::vector<Matrix<T>>& weights,
                              const Matrix<T>& x) {
  Matrix<T> h = x;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    h = matmul_nt(h, weights[l]);
    apply_activation(h, model.layers[l].activation);
  }
  return h;
}

template <class T>
void train_endtoend(const Model<T>& model, const Matrix<T>& calibration, const TrainConfig& config,
                    const std::vector<LayerProblem<T>>& problems, const std::vector<bool>& learned,
                    const Matrix<T>& dense_output, TrainResult<T>& result) {
  const std::size_t layer_count = model.layers.size();
  Rng root(config.seed);

  // Fixed permutations for layers that do not learn; learned layers start
  // from the identity baseline.
  std::vector<PermutationIndices> current(layer_count);
  std::vector<BlockPermutationParams<T>> params(layer_count);
  std::vector<std::size_t> offset(layer_count, 0);
  std::vector<Matrix<T>> all_blocks;
  for (std::size_t l = 0; l < layer_count; ++l) {
    const auto& p = problems[l];
    if (learned[l]) {
      current[l] = PermutationIndices::identity(p.layout.c_in());
      Rng layer_rng = root.split(l);
      params[l] = init_for_layout<T>(p.layout, layer_rng, config.init_stddev);
      offset[l] = all_blocks.size();
      for (const auto& b : params[l].blocks) all_blocks.push_back(b);
    } else {
      current[l] = result.layers[l].perm;
    }
  }

  auto best_perms = current;
  result.model_loss =
      loss_cosine(dense_output, sparse_model_output(model, effective_weights(problems, best_perms), calibration));
  std::optional<std::size_t> best_step;

  std::vector<LayerTape<T>> tapes;
  tapes.reserve(layer_count);
  for (std::size_t l = 0; l < layer_count; ++l)
    tapes.emplace_back(problems[l], PipelineOptions{false, config.score_path_gradient, config.sinkhorn_iters});

  auto state = AdamWState<T>::zeros_like(all_blocks);
  const auto schedule = config.schedule();
  Rng noise_rng = root.split(layer_count + 1);

  for (std::size_t step = 0; step <= config.steps && config.steps > 0; ++step) {
    const T tau = static_cast<T>(tau_at(schedule, std::min(step, schedule.total_steps)));
    std::vector<Matrix<T>> weights(layer_count);
    for (std::size_t l = 0; l < layer_count; ++l) {
      if (!learned[l]) {
        weights[l] = effective_weights<T>({problems[l]}, {current[l]})[0];
        continue;
      }
      std::vector<Matrix<T>> blocks(all_blocks.begin() + offset[l],
                                    all_blocks.begin() + offset[l] + params[l].blocks.size());
      const auto noise = gumbel_offsets(blocks, config.gumbel_noise, noise_rng);
      auto out = tapes[l].forward_weight(blocks, tau, noise);
      check_mask_in_debug(out.mask, problems[l].nm);
      current[l] = out.perm;
      weights[l] = std::move(out.effective_weight);
    }

    // Forward through the sparse stack, keeping what the backward needs.
    std::vector<Matrix<T>> inputs{calibration};
    std::vector<Matrix<T>> pre;
    for (std::size_t l = 0; l < layer_count; ++l) {
      Matrix<T> z = matmul_nt(inputs.back(), weights[l]);
      pre.push_back(z);
      apply_activation(z, model.layers[l].activation);
      inputs.push_back(std::move(z));
    }
    const T loss = loss_cosine(dense_output, inputs.back());
    if (!std::isfinite(loss)) {
      result.diverged = true;
      result.diagnostic = "non-finite loss at step " + std::to_string(step);
      break;
    }
    for (auto& s : result.layers)
      if (s.learned) s.loss_history.push_back(loss);
    if (loss < result.model_loss) {
      result.model_loss = loss;
      best_perms = current;
      best_step = step;
    }
    if (step == config.steps) break;

    std::vector<Matrix<T>> grads(all_blocks.size());
    Matrix<T> g = loss_cosine_grad(dense_output, inputs.back());
    for (std::size_t l = layer_count; l-- > 0;) {
      activation_pullback(g, pre[l], model.layers[l].activation);
      const Matrix<T> g_weight = matmul_tn(g, inputs[l]);
      if (l > 0) g = matmul(g, weights[l]);
      if (!learned[l]) continue;
      auto block_grads = tapes[l].backward_weight(g_weight);
      for (std::size_t b = 0; b < block_grads.size(); ++b) grads[offset[l] + b] = std::move(block_grads[b]);
    }
    try {
      adamw_step(all_blocks, grads, state, config.optimizer());
    } catch (const Error& e) {
      if (e.code() != ErrorCode::non_finite) throw;
      result.diverged = true;
      result.diagnostic = "step " + std::to_string(step) + ": " + e.what();
      break;
    }
  }

  for (std::size_t l = 0; l < layer_count; ++l) {
    if (!learned[l]) continue;
    adopt(result.layers[l], evaluate_permutation(problems[l], best_perms[l]));
    result.layers[l].best_step = best_step;
  }
}

}  // namespace

template <class T>
TrainResult<T> train(const Model<T>& model, const Matrix<T>& calibration,
                     const TrainConfig& config, const NMConfig& nm) {
  model.validate();
  config.validate();
  nm.validate();
  require(calibration.rows() > 0 && calibration.cols() == model.input_dim(),
          ErrorCode::shape_mismatch, "calibration does not match the model input");

  std::size_t total_weights = 0;
  for (const auto& l : model.layers) total_weights += l.weight.size();

  TrainResult<T> result;
  result.mode = resolve_mode(config.mode, total_weights);

  const std::size_t layer_count = model.layers.size();
  std::vector<bool> learned(layer_count, !config.partial_layers.has_value());
  if (config.partial_layers) {
    for (const auto& name : *config.partial_layers) learned[model.index_of(name)] = true;
  }

  const auto dense = model.forward_all(calibration);
  std::vector<LayerProblem<T>> problems;
  for (std::size_t l = 0; l < layer_count; ++l) {
    const auto& layer = model.layers[l];
    problems.push_back(LayerProblem<T>::make(layer.weight, dense[l], config.metric, nm,
                                             layer_layout(layer.c_in(), config, nm)));
  }

  // Baselines, and the heuristic permutation for layers that do not learn.
  result.layers.resize(layer_count);
  parallel_for(layer_count, [&](std::size_t l) {
    auto s = baseline_solution<T>(model.layers[l].name, problems[l]);
    s.learned = learned[l];
    if (!learned[l]) {
      adopt(s, evaluate_permutation(problems[l],
                                    heuristic_cp(problems[l].scores, nm, problems[l].layout)));
    }
    result.layers[l] = std::move(s);
  });

  if (result.mode == TrainMode::layerwise) {
    std::vector<std::string> diagnostics(layer_count);
    parallel_for(layer_count, [&](std::size_t l) {
      if (!learned[l]) return;
      Rng layer_rng = Rng(config.seed).split(l);
      auto s = train_layer(problems[l], config, layer_rng, &diagnostics[l]);
      s.layer = model.layers[l].name;
      result.layers[l] = std::move(s);
    });
    for (std::size_t l = 0; l < layer_count; ++l) {
      if (diagnostics[l].empty()) continue;
      result.diverged = true;
      result.diagnostic += (result.diagnostic.empty() ? "" : "; ") + model.layers[l].name + ": " + diagnostics[l];
    }
  } else {
    train_endtoend(model, calibration, config, problems, learned, dense.back(), result);
  }

  std::vector<PermutationIndices> chosen, identity, heuristic;
  for (std::size_t l = 0; l < layer_count; ++l) {
    chosen.push_back(result.layers[l].perm);
    identity.push_back(PermutationIndices::identity(model.layers[l].c_in()));
    heuristic.push_back(heuristic_cp(problems[l].scores, nm, problems[l].layout));
  }
  auto model_loss = [&](const std::vector<PermutationIndices>& perms) {
    return loss_cosine(dense.back(), sparse_model_output(model, effective_weights(problems, perms), calibration));
  };
  result.model_loss = model_loss(chosen);
  result.model_identity_loss = model_loss(identity);
  result.model_heuristic_loss = model_loss(heuristic);
  return result;
}

#define PERMNM_INSTANTIATE(T)                                                                     \
  template struct BlockPermutationParams<T>;                                                      \
  template BlockPermutationParams<T> init_params(std::size_t, std::size_t, Rng&, double);         \
  template T loss_cosine(const Matrix<T>&, const Matrix<T>&);                                     \
  template Matrix<T> loss_cosine_grad(const Matrix<T>&, const Matrix<T>&);                        \
  template T loss_mse(const Matrix<T>&, const Matrix<T>&);                                        \
  template struct LayerProblem<T>;                                                                \
  template Matrix<T> effective_weight(const Matrix<T>&, const PermutationIndices&,                \
                                      const SparsityMask<T>&);                                    \
  template HardEvaluation<T> evaluate_permutation(const LayerProblem<T>&,                         \
                                                  const PermutationIndices&);                     \
  template SparseForward<T> forward_sparse(const Matrix<T>&, const Matrix<T>&,                    \
                                           const BlockPermutationParams<T>&, T, std::size_t,      \
                                           const NMConfig&, const ImportanceScores<T>&);          \
  template PermutationSolution<T> train_layer(const LayerProblem<T>&, const TrainConfig&, Rng&,   \
                                              std::string*);                                      \
  template TrainResult<T> train(const Model<T>&, const Matrix<T>&, const TrainConfig&,            \
                                const NMConfig&);

PERMNM_INSTANTIATE(float)
PERMNM_INSTANTIATE(double)

#undef PERMNM_INSTANTIATE

}  // namespace permnm
