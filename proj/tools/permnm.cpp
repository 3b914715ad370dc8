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

#include <cstdio>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "permnm/bench.hpp"
#include "permnm/container.hpp"
#include "permnm/error.hpp"
#include "permnm/fixtures.hpp"
#include "permnm/pipeline.hpp"

namespace {

struct PruneFlags {
  std::string model;
  std::string calib;
  std::string nm = "2:4";
  std::string metric = "wanda";
  std::size_t block_size = 64;
  std::size_t steps = 50;
  double lr = 1e-3;
  std::size_t sinkhorn_iters = 5;
  double tau_start = 1.0;
  double tau_end = 0.1;
  std::string mode = "automatic";
  std::string partial_layers;
  std::uint64_t seed = 0;
  std::string out;
  std::string precision = "f32";
  std::uint64_t oracle_limit = permnm::kOracleMaxCandidates;
};

void add_prune_flags(CLI::App* cmd, PruneFlags& f) {
  cmd->add_option("--model", f.model, "Model container manifest")->required();
  cmd->add_option("--calib", f.calib, "Calibration container manifest")->required();
  cmd->add_option("--nm", f.nm, "Sparsity pattern N:M (N zeros per M)")->capture_default_str();
  cmd->add_option("--metric", f.metric, "Importance metric")
      ->check(CLI::IsMember({"magnitude", "wanda"}))
      ->capture_default_str();
  cmd->add_option("--block-size", f.block_size, "Permutation block size")->capture_default_str();
  cmd->add_option("--steps", f.steps, "Training steps")->capture_default_str();
  cmd->add_option("--lr", f.lr, "AdamW learning rate")->capture_default_str();
  cmd->add_option("--sinkhorn-iters", f.sinkhorn_iters, "Sinkhorn iterations")->capture_default_str();
  cmd->add_option("--tau-start", f.tau_start, "Initial temperature")->capture_default_str();
  cmd->add_option("--tau-end", f.tau_end, "Final temperature")->capture_default_str();
  cmd->add_option("--mode", f.mode, "Training objective")
      ->check(CLI::IsMember({"layerwise", "endtoend", "automatic"}))
      ->capture_default_str();
  cmd->add_option("--partial-layers", f.partial_layers,
                  "Comma-separated layers that learn permutations (others use the heuristic)");
  cmd->add_option("--seed", f.seed, "Random seed")->capture_default_str();
  cmd->add_option("--out", f.out, "Output directory");
  cmd->add_option("--precision", f.precision, "Training precision")
      ->check(CLI::IsMember({"f32", "f64"}))
      ->capture_default_str();
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

permnm::RunOptions run_options(const PruneFlags& f, bool with_oracle) {
  permnm::RunOptions o;
  o.nm = permnm::NMConfig::parse(f.nm);
  o.precision = permnm::parse_precision(f.precision);
  o.with_oracle = with_oracle;
  o.oracle_limit = f.oracle_limit;
  auto& t = o.train;
  t.metric = permnm::parse_metric(f.metric);
  t.block_size = f.block_size;
  t.steps = f.steps;
  t.learning_rate = f.lr;
  t.sinkhorn_iters = f.sinkhorn_iters;
  t.tau_start = f.tau_start;
  t.tau_end = f.tau_end;
  t.mode = permnm::parse_mode(f.mode);
  t.seed = f.seed;
  if (!f.partial_layers.empty()) t.partial_layers = split_list(f.partial_layers);
  return o;
}

void print_summary(const permnm::Report& r) {
  std::printf("%-16s %12s %12s %12s %12s\n", "layer", "identity", "heuristic", "permllm", "oracle");
  for (const auto& l : r.layers) {
    char oracle[32] = "-";
    if (l.oracle_loss) std::snprintf(oracle, sizeof oracle, "%.6g", *l.oracle_loss);
    std::printf("%-16s %12.6g %12.6g %12.6g %12s\n", l.name.c_str(), l.identity_loss,
                l.heuristic_cp_loss, l.permllm_loss, oracle);
  }
  std::printf("%-16s %12.6g %12.6g %12.6g\n", "model", r.model_identity_loss,
              r.model_heuristic_cp_loss, r.model_permllm_loss);
  if (r.diverged) std::printf("diverged: %s\n", r.diagnostic.c_str());
}

int run_prune(const PruneFlags& f, bool compare, const std::string& command) {
  const auto model = permnm::load_model(f.model);
  const auto calib = permnm::load_calibration(f.calib);
  std::optional<std::filesystem::path> out;
  if (!f.out.empty()) out = f.out;
  const auto result = permnm::run_pipeline(model, calib, run_options(f, compare), command, out);
  if (compare && !out) {
    std::cout << permnm::report_json(result.report);
  } else {
    print_summary(result.report);
  }
  return 0;
}

struct GenerateFlags {
  std::string kind = "mlp";
  std::string dims = "16,8,4";
  std::size_t samples = permnm::kDefaultCalibrationSamples;
  std::size_t features = 0;
  std::uint64_t seed = 0;
  std::string out;
};

int run_generate(const GenerateFlags& g) {
  const std::filesystem::path dir(g.out);
  std::filesystem::create_directories(dir);
  if (g.kind == "mlp") {
    std::vector<std::size_t> dims;
    for (const auto& d : split_list(g.dims)) dims.push_back(std::stoul(d));
    const auto model = permnm::generate_mlp(dims, g.seed);
    permnm::save_model(dir / "model.json", model);
    permnm::save_calibration(dir / "calib.json",
                             permnm::generate_calibration(g.samples, dims.front(), g.seed + 1));
    std::printf("wrote %s and %s\n", (dir / "model.json").c_str(), (dir / "calib.json").c_str());
  } else if (g.kind == "calibration") {
    permnm::require(g.features > 0, permnm::ErrorCode::contract_violation,
                    "generate calibration: --features is required");
    permnm::save_calibration(dir / "calib.json",
                             permnm::generate_calibration(g.samples, g.features, g.seed));
    std::printf("wrote %s\n", (dir / "calib.json").c_str());
  } else {
    const auto inst = permnm::search_score_trap(g.seed);
    permnm::save_model(dir / "score_trap_model.json", inst.model);
    permnm::save_calibration(dir / "score_trap_calib.json", inst.calibration);
    std::printf("trial %llu: retained %.6g -> %.6g, mse %.6g -> %.6g, loss %.6g -> %.6g\n",
                static_cast<unsigned long long>(inst.trial), inst.identity_retained,
                inst.heuristic_retained, inst.identity_mse, inst.heuristic_mse,
                inst.identity_loss, inst.heuristic_loss);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learned channel permutations for N:M sparse linear layers"};
  app.require_subcommand(1);

  PruneFlags prune_flags;
  auto* prune = app.add_subcommand("prune", "Learn permutations, prune, fold and export");
  add_prune_flags(prune, prune_flags);

  PruneFlags compare_flags;
  auto* compare = app.add_subcommand("compare", "Compare identity, heuristic, learned and oracle");
  add_prune_flags(compare, compare_flags);
  compare->add_option("--oracle-limit", compare_flags.oracle_limit,
                      "Largest candidate count the oracle may enumerate")
      ->capture_default_str();

  std::size_t bench_n = 2048, bench_iterations = 5, bench_rows = 64;
  auto* bench = app.add_subcommand("bench", "Time gather vs. dense-matmul column permutation");
  bench->add_option("--n", bench_n, "Permutation size")->capture_default_str();
  bench->add_option("--iterations", bench_iterations, "Timed runs per method")->capture_default_str();
  bench->add_option("--rows", bench_rows, "Rows of the permuted matrix")->capture_default_str();

  GenerateFlags gen;
  auto* generate = app.add_subcommand("generate", "Write synthetic fixtures");
  generate->add_option("--kind", gen.kind, "Fixture kind (fig1-search and score-trap name the same search)")
      ->check(CLI::IsMember({"mlp", "calibration", "fig1-search", "score-trap"}))
      ->capture_default_str();
  generate->add_option("--dims", gen.dims, "Layer widths for mlp, input first")->capture_default_str();
  generate->add_option("--samples", gen.samples, "Calibration rows")->capture_default_str();
  generate->add_option("--features", gen.features, "Calibration columns (calibration kind)");
  generate->add_option("--seed", gen.seed, "Random seed")->capture_default_str();
  generate->add_option("--out", gen.out, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*prune) return run_prune(prune_flags, false, "prune");
    if (*compare) return run_prune(compare_flags, true, "compare");
    if (*bench) {
      const auto b = permnm::bench_permutation(bench_n, bench_iterations, bench_rows);
      std::printf("n=%zu rows=%zu iterations=%zu gather=%.3e s matmul=%.3e s ratio=%.1f\n", b.n,
                  b.rows, b.iterations, b.gather_seconds, b.matmul_seconds, b.ratio);
      return 0;
    }
    return run_generate(gen);
  } catch (const permnm::Error& e) {
    std::fprintf(stderr, "error[%s]: %s\n", std::string(permnm::to_string(e.code())).c_str(),
                 e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
