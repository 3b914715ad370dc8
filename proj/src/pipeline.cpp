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

#include "permnm/pipeline.hpp"

#include <chrono>

#include "permnm/container.hpp"
#include "permnm/error.hpp"

namespace permnm {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string file_stem_for(const std::string& layer) {
  std::string out = layer;
  for (char& c : out) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '.' || c == '_' || c == '-';
    if (!ok) c = '_';
  }
  return out;
}

template <class T>
void attach_oracle(const Model<T>& model, const Matrix<T>& calibration, const RunOptions& options,
                   Report& report) {
  const auto dense = model.forward_all(calibration);
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    auto& lr = report.layers[l];
    const auto& layer = model.layers[l];
    const auto problem =
        LayerProblem<T>::make(layer.weight, dense[l], options.train.metric, options.nm,
                              layer_layout(layer.c_in(), options.train, options.nm));
    try {
      const auto oracle = oracle_best_partition(problem, options.oracle_limit);
      const auto eval = evaluate_permutation(problem, oracle.best_grouping);
      lr.oracle_loss = static_cast<double>(oracle.best_loss);
      lr.oracle_retained = static_cast<double>(eval.retained);
      lr.oracle_evaluated = oracle.evaluated_count;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::too_large) throw;
      lr.oracle_note = e.what();
    }
  }
}

template <class T>
RunOutput run_typed(const Model<float>& model32, const Matrix<float>& calibration32,
                    const RunOptions& options, const std::string& command) {
  const auto start = Clock::now();
  const Model<T> model = model32.template cast<T>();
  const Matrix<T> calibration = calibration32.template cast<T>();

  const auto train_start = Clock::now();
  const auto result = train(model, calibration, options.train, options.nm);
  const double train_seconds = seconds_since(train_start);

  const auto folded = fold_and_export(model, result.layers, options.nm);

  Report report;
  report.command = command;
  report.config = options.train;
  report.nm = options.nm;
  report.precision = options.precision;
  report.resolved_mode = result.mode;
  report.model_identity_loss = static_cast<double>(result.model_identity_loss);
  report.model_heuristic_cp_loss = static_cast<double>(result.model_heuristic_loss);
  report.model_permllm_loss = static_cast<double>(result.model_loss);
  report.diverged = result.diverged;
  report.diagnostic = result.diagnostic;
  const double expected_density =
      static_cast<double>(options.nm.keep()) / static_cast<double>(options.nm.group);
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const auto& s = result.layers[l];
    LayerReport lr;
    lr.name = s.layer;
    lr.c_out = model.layers[l].c_out();
    lr.c_in = model.layers[l].c_in();
    lr.block_boundaries = s.layout.boundaries;
    lr.learned = s.learned;
    lr.best_step = s.best_step;
    lr.identity_loss = static_cast<double>(s.identity_loss);
    lr.heuristic_cp_loss = static_cast<double>(s.heuristic_cp_loss);
    lr.permllm_loss = static_cast<double>(s.achieved_loss);
    lr.identity_retained = static_cast<double>(s.identity_retained);
    lr.heuristic_cp_retained = static_cast<double>(s.heuristic_cp_retained);
    lr.permllm_retained = static_cast<double>(s.retained_score);
    lr.mask_density = mask_density(s.mask);
    lr.mask_valid = !find_mask_violation(s.mask, options.nm) && lr.mask_density == expected_density;
    require(lr.mask_valid, ErrorCode::contract_violation,
            "layer '" + lr.name + "' produced an invalid N:M mask");
    report.layers.push_back(std::move(lr));
  }

  if (options.with_oracle) {
    const auto oracle_start = Clock::now();
    attach_oracle(model, calibration, options, report);
    report.timing.oracle_seconds = seconds_since(oracle_start);
  }
  report.timing.train_seconds = train_seconds;
  report.timing.total_seconds = seconds_since(start);

  RunOutput out;
  out.report = std::move(report);
  out.folded.model = folded.model.template cast<float>();
  out.folded.input_gather = folded.input_gather;
  out.folded.sidecar = folded.sidecar;
  out.folded.compressed = folded.compressed;
  return out;
}

}  // namespace

RunOutput run_pipeline(const Model<float>& model, const Matrix<float>& calibration,
                       const RunOptions& options, const std::string& command,
                       const std::optional<std::filesystem::path>& out_dir) {
  options.nm.validate();
  options.train.validate();
  auto out = options.precision == Precision::f64
                 ? run_typed<double>(model, calibration, options, command)
                 : run_typed<float>(model, calibration, options, command);
  if (out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(*out_dir, ec);
    require(!ec, ErrorCode::io_error, "cannot create '" + out_dir->string() + "': " + ec.message());
    for (std::size_t l = 0; l < out.folded.compressed.size(); ++l) {
      // Every exported layer must decode back to a valid N:M matrix.
      const auto decoded = decompress_nm(out.folded.compressed[l]);
      require(!find_weight_violation(decoded, options.nm) &&
                  decoded == out.folded.model.layers[l].weight,
              ErrorCode::contract_violation, "export of layer " + std::to_string(l) + " is corrupt");
      save_compressed(*out_dir / (file_stem_for(out.folded.model.layers[l].name) + ".pnmc"),
                      out.folded.compressed[l]);
    }
    write_text(*out_dir / "permutations.json", sidecar_json(out.folded.sidecar));
    save_model(*out_dir / "pruned.json", out.folded.model);
    write_text(*out_dir / "report.json", report_json(out.report));
  }
  return out;
}

}  // namespace permnm
