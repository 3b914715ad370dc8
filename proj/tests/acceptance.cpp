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

// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>

#include <json.hpp>

#include "permnm/assignment.hpp"
#include "permnm/bench.hpp"
#include "permnm/container.hpp"
#include "permnm/error.hpp"
#include "permnm/fixtures.hpp"
#include "permnm/fold.hpp"
#include "permnm/layer_tape.hpp"
#include "permnm/nm_codec.hpp"
#include "permnm/reference.hpp"
#include "permnm/rng.hpp"
#include "permnm/sinkhorn.hpp"

using namespace permnm;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(int id, const char* name, double budget_seconds, const std::function<Outcome()>& body) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("threw: ") + e.what()};
  }
  const double elapsed = std::chrono::duration<double>(Clock::now() - t0).count();
  if (elapsed > budget_seconds) {
    o.pass = false;
    o.detail += "; over the " + std::to_string(budget_seconds) + " s budget";
  }
  if (!o.pass) ++failures;
  std::printf("%s %2d %-22s %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), elapsed);
  std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

double best_group_sum(std::span<const double> g, std::size_t keep) {
  double best = -1;
  for (unsigned bits = 0; bits < (1u << g.size()); ++bits) {
    if (static_cast<std::size_t>(__builtin_popcount(bits)) != keep) continue;
    double s = 0;
    for (std::size_t k = 0; k < g.size(); ++k)
      if (bits >> k & 1u) s += g[k];
    best = std::max(best, s);
  }
  return best;
}

bool bitwise_equal(const Matrix<float>& a, const Matrix<float>& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(float)) == 0;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome sinkhorn_convergence() {
  Rng rng(1001);
  double worst5 = 0, worst50 = 0;
  for (int i = 0; i < 100; ++i) {
    const auto x = rng.normal_matrix<double>(64, 64);
    const auto e5 = marginal_error(sinkhorn_normalize(x, 5).entries);
    const auto e50 = marginal_error(sinkhorn_normalize(x, 50).entries);
    worst5 = std::max({worst5, e5.max_row_error, e5.max_col_error});
    worst50 = std::max({worst50, e50.max_row_error, e50.max_col_error});
  }
  return {worst5 <= 5e-2 && worst50 <= 1e-4, fmt("max marginal error L=5 %.2e, L=50 %.2e", worst5, worst50)};
}

Outcome lsa_exactness() {
  Rng rng(1002);
  int equal = 0;
  for (int i = 0; i < 200; ++i) {
    const std::size_t n = 1 + rng.below(8);
    const auto score = rng.normal_matrix<double>(n, n);
    equal += solve_lsa(score).objective == exhaustive_lsa(score).objective;
  }
  return {equal == 200, fmt("%.0f/200 objectives equal", equal)};
}

Outcome mask_optimality() {
  Rng rng(1003);
  const NMConfig nm{2, 4};
  int optimal = 0;
  bool counts_ok = true;
  for (int i = 0; i < 100; ++i) {
    const ImportanceScores<double> s(magnitude_scores(rng.normal_matrix<double>(8, 16)));
    const auto m = nm_mask(s, nm);
    counts_ok = counts_ok && !find_mask_violation(m, nm);
    // Same summation order as retained_score: row-major over kept entries.
    double best = 0;
    for (std::size_t r = 0; r < 8; ++r) {
      for (std::size_t g = 0; g < 4; ++g) {
        const double target = best_group_sum(s.scores.row(r).subspan(g * 4, 4), nm.keep());
        double kept = 0;
        for (std::size_t k = 0; k < 4; ++k)
          if (m.mask(r, g * 4 + k) != 0.0) kept += s.scores(r, g * 4 + k);
        if (kept != target) counts_ok = false;
        for (std::size_t k = 0; k < 4; ++k)
          if (m.mask(r, g * 4 + k) != 0.0) best += s.scores(r, g * 4 + k);
      }
    }
    optimal += retained_score(s, m) == best;
  }
  return {optimal == 100 && counts_ok,
          fmt("%.0f/100 retained scores optimal, group counts ", optimal) + (counts_ok ? "ok" : "WRONG")};
}

Outcome gradient_fidelity() {
  double worst = 0;
  for (int pt = 0; pt < 20; ++pt) {
    const auto problem = toy_layer(100 + pt, ImportanceMetric::wanda, 32);
    Rng rng(pt);
    const std::vector<MatrixD> blocks{rng.normal_matrix<double>(8, 8)};
    LayerTape<double> tape(problem, {true, true, 5});
    tape.forward(blocks, 1.0);
    worst = std::max(worst, finite_diff_check<double>(tape.tape(), blocks, 1e-5).max_relative_error);
  }
  return {worst <= 1e-4, fmt("max relative error %.2e over 20 points", worst)};
}

Outcome oracle_suite() {
  // Thresholds frozen from the first calibration run against the oracle:
  // 34/50 seeds at or below the heuristic, mean gap 0.058.
  int le_identity = 0, le_heuristic = 0;
  double gap = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto problem = toy_layer(seed);
    TrainConfig t;
    t.block_size = 8;
    t.steps = 50;
    t.seed = seed;
    Rng rng(seed);
    const auto s = train_layer(problem, t, rng);
    const auto oracle = oracle_best_partition(problem);
    le_identity += s.achieved_loss <= s.identity_loss;
    le_heuristic += s.achieved_loss <= s.heuristic_cp_loss;
    gap += (s.achieved_loss - oracle.best_loss) / oracle.best_loss;
  }
  gap /= 50;
  const bool ok = le_identity == 50 && le_heuristic > 25 && gap <= 0.10;
  return {ok, fmt("<=identity %.0f/50, <=heuristic %.0f/50, mean oracle gap %.2f%%", le_identity,
                  le_heuristic, 100 * gap)};
}

Outcome score_vs_loss_fixture() {
  const fs::path dir(PERMNM_FIXTURE_DIR);
  const auto inst = evaluate_score_trap(load_model(dir / "score_trap_model.json"), load_calibration(dir / "score_trap_calib.json"));
  const bool ok = inst.heuristic_retained > inst.identity_retained && inst.heuristic_loss > inst.identity_loss;
  return {ok, fmt("retained %.4f -> %.4f, loss %.5f -> %.5f", inst.identity_retained, inst.heuristic_retained,
                  inst.identity_loss, inst.heuristic_loss)};
}

Outcome combinatorics() {
  const auto a = count_partitions(16, 4);
  const auto b = count_partitions(8, 4);
  return {a == 2627625 && b == 35, "count(16,4)=" + a.str() + " count(8,4)=" + b.str()};
}

Outcome complexity() {
  Rng rng(1008);
  bool params_ok = true;
  for (auto [c_in, block] : {std::pair<std::size_t, std::size_t>{4096, 64}, {512, 32}, {64, 64}, {256, 8}})
    params_ok = params_ok && init_params<double>(c_in, block, rng).parameter_count() == c_in * block;

  const std::size_t sizes[] = {64, 128, 256};
  double lx[3], ly[3];
  for (int i = 0; i < 3; ++i) {
    const std::size_t n = sizes[i];
    std::vector<double> samples;
    for (int rep = 0; rep < 5; ++rep) {
      const auto score = rng.normal_matrix<double>(n, n);
      const auto t0 = Clock::now();
      const auto a = solve_lsa(score);
      samples.push_back(std::chrono::duration<double>(Clock::now() - t0).count());
      if (a.perm.size() != n) params_ok = false;
    }
    std::sort(samples.begin(), samples.end());
    lx[i] = std::log(static_cast<double>(n));
    ly[i] = std::log(samples[2]);
  }
  const double mx = (lx[0] + lx[1] + lx[2]) / 3, my = (ly[0] + ly[1] + ly[2]) / 3;
  double num = 0, den = 0;
  for (int i = 0; i < 3; ++i) {
    num += (lx[i] - mx) * (ly[i] - my);
    den += (lx[i] - mx) * (lx[i] - mx);
  }
  const double slope = num / den;
  return {params_ok && slope <= 3.5,
          std::string("parameter counts ") + (params_ok ? "ok" : "WRONG") + fmt(", Hungarian log-log slope %.2f", slope)};
}

Outcome fold_correctness() {
  const auto model = generate_mlp({16, 16, 8}, 1009).cast<double>();
  const auto x = generate_calibration(64, 16, 1010).cast<double>();
  TrainConfig t;
  t.block_size = 8;
  t.steps = 30;
  t.mode = TrainMode::layerwise;
  const auto r = train(model, x, t, {2, 4});
  const auto folded = fold_and_export(model, r.layers, {2, 4});
  const auto probe = generate_calibration(32, 16, 1011).cast<double>();
  const auto y_fold = folded_forward(folded, probe);
  const auto y_sparse = sparse_forward(model, r.layers, probe);
  const double rel = max_abs_diff(y_fold, y_sparse) / std::max(frobenius_norm(y_sparse), 1e-30);
  bool nm_ok = true;
  for (const auto& layer : folded.model.layers) nm_ok = nm_ok && !find_weight_violation(layer.weight, {2, 4});
  const bool permuted = !r.layers[1].perm.is_identity();
  return {rel <= 1e-5 && nm_ok, fmt("relative deviation %.2e, ", rel) + "N:M after row permutation " +
                                    (nm_ok ? "ok" : "VIOLATED") + (permuted ? "" : " (second layer kept identity)")};
}

Outcome round_trips() {
  const auto dir = fs::temp_directory_path() / "permnm_acceptance_roundtrip";
  fs::remove_all(dir);
  fs::create_directories(dir);
  Rng rng(1012);
  int codec_ok = 0, container_ok = 0;
  for (int i = 0; i < 100; ++i) {
    const NMConfig nm = i % 3 == 0 ? NMConfig{4, 8} : NMConfig{2, 4};
    const std::size_t rows = 1 + rng.below(16), cols = nm.group * (1 + rng.below(8));
    const auto w = rng.normal_matrix<float>(rows, cols);
    const auto pruned = apply_mask(nm_mask(magnitude_scores(w), nm), w);
    const auto c = compress_nm(pruned, nm);
    save_compressed(dir / "w.pnmc", c);
    const auto back = load_compressed(dir / "w.pnmc");
    codec_ok += back == c && serialize(back) == serialize(c) && bitwise_equal(decompress_nm(back), pruned);

    TensorContainer tc;
    tc.add("a", w);
    tc.add("b", rng.normal_matrix<float>(1 + rng.below(5), 1 + rng.below(5)));
    save_container(dir / "t.json", tc);
    const auto loaded = load_container(dir / "t.json");
    container_ok += loaded.blob == tc.blob && bitwise_equal(loaded.tensor("a"), w) &&
                    read_text(dir / "t.json") == tc.manifest_json("t.bin");
  }
  fs::remove_all(dir);
  return {codec_ok == 100 && container_ok == 100,
          fmt("compressed %.0f/100, container %.0f/100 bitwise identical", codec_ok, container_ok)};
}

Outcome determinism() {
  const auto dir = fs::temp_directory_path() / "permnm_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  save_model(dir / "model.json", generate_mlp({16, 8, 4}, 1013));
  save_calibration(dir / "calib.json", generate_calibration(64, 16, 1014));
  const std::string cli = PERMNM_CLI_PATH;
  std::string reports[2];
  for (int i = 0; i < 2; ++i) {
    const auto out = dir / ("report" + std::to_string(i) + ".json");
    const std::string cmd = cli + " compare --model " + (dir / "model.json").string() + " --calib " +
                            (dir / "calib.json").string() + " --block-size 8 --seed 7 > " + out.string();
    if (std::system(cmd.c_str()) != 0) return {false, "compare exited with an error"};
    auto j = nlohmann::ordered_json::parse(read_text(out));
    j.erase("timing");
    reports[i] = j.dump();
  }
  fs::remove_all(dir);
  return {reports[0] == reports[1] && !reports[0].empty(),
          reports[0] == reports[1] ? "two compare runs produced identical reports" : "reports differ"};
}

Outcome benchmark() {
  const auto b = bench_permutation(2048, 5);
  return {b.ratio >= 10.0, fmt("gather %.2e s, dense matmul %.2e s, ratio %.0fx (machine-dependent)",
                               b.gather_seconds, b.matmul_seconds, b.ratio)};
}

}  // namespace

int main() {
  set_warnings_enabled(false);
  criterion(1, "sinkhorn convergence", 5, sinkhorn_convergence);
  criterion(2, "lsa exactness", 10, lsa_exactness);
  criterion(3, "mask optimality", 5, mask_optimality);
  criterion(4, "gradient fidelity", 30, gradient_fidelity);
  criterion(5, "oracle suite", 300, oracle_suite);
  criterion(6, "score-vs-loss fixture", 1, score_vs_loss_fixture);
  criterion(7, "combinatorics", 1, combinatorics);
  criterion(8, "complexity", 30, complexity);
  criterion(9, "fold correctness", 5, fold_correctness);
  criterion(10, "round trips", 5, round_trips);
  criterion(11, "determinism", 60, determinism);
  criterion(12, "benchmark sanity", 60, benchmark);
  std::printf("%d/12 criteria passed\n", 12 - failures);
  return failures == 0 ? 0 : 1;
}
