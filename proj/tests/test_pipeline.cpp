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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "permnm/bench.hpp"
#include "permnm/container.hpp"
#include "permnm/error.hpp"
#include "permnm/fixtures.hpp"
#include "permnm/pipeline.hpp"
#include "permnm/rng.hpp"
#include "test_util.hpp"

using namespace permnm;
using permnm::testing::error_code_of;
using permnm::testing::error_message_of;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("permnm_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

RunOptions small_options(bool oracle) {
  RunOptions o;
  o.train.block_size = 8;
  o.train.steps = 20;
  o.train.seed = 3;
  o.with_oracle = oracle;
  return o;
}

bool bitwise_equal(const Matrix<float>& a, const Matrix<float>& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(float)) == 0;
}

}  // namespace

TEST_CASE("tensor container round trip is bitwise") {
  const auto dir = scratch_dir("container");
  Rng rng(51);
  TensorContainer c;
  auto a = rng.normal_matrix<float>(3, 5);
  a(0, 0) = -0.0f;
  c.add("a", a);
  c.add("b", rng.normal_matrix<float>(7, 2));
  c.topology.push_back({"fc", "a", "input", "relu"});
  save_container(dir / "t.json", c);
  CHECK(fs::exists(dir / "t.bin"));
  const auto back = load_container(dir / "t.json");
  CHECK(back.blob == c.blob);
  CHECK(bitwise_equal(back.tensor("a"), a));
  CHECK(back.entry("b").byte_offset == 60);
  CHECK(back.topology.size() == 1);
  CHECK(back.topology[0].activation == "relu");
  CHECK(error_code_of([&] { back.tensor("zzz"); }) == ErrorCode::manifest_error);
}

TEST_CASE("truncated blob is reported") {
  const auto dir = scratch_dir("truncated");
  TensorContainer c;
  c.add("x", Matrix<float>(4, 4, 1.0f));
  save_container(dir / "t.json", c);
  fs::resize_file(dir / "t.bin", 40);
  CHECK(error_code_of([&] { load_container(dir / "t.json"); }) == ErrorCode::blob_error);
  CHECK(error_message_of([&] { load_container(dir / "t.json"); }).find("blob shorter than manifest extent") !=
        std::string::npos);
}

TEST_CASE("malformed manifests are rejected") {
  const auto dir = scratch_dir("manifest");
  TensorContainer c;
  c.add("x", Matrix<float>(2, 2, 1.0f));
  save_container(dir / "t.json", c);
  auto manifest = nlohmann::json::parse(read_text(dir / "t.json"));

  auto write = [&](const nlohmann::json& j) { write_text(dir / "t.json", j.dump()); };
  write_text(dir / "t.json", "{not json");
  CHECK(error_code_of([&] { load_container(dir / "t.json"); }) == ErrorCode::manifest_error);

  auto bad = manifest;
  bad["format"] = "something-else";
  write(bad);
  CHECK(error_code_of([&] { load_container(dir / "t.json"); }) == ErrorCode::manifest_error);

  bad = manifest;
  bad["tensors"][0].erase("shape");
  write(bad);
  CHECK(error_code_of([&] { load_container(dir / "t.json"); }) == ErrorCode::manifest_error);

  bad = manifest;
  bad["tensors"][0]["byte_length"] = 12;
  write(bad);
  CHECK(error_code_of([&] { load_container(dir / "t.json"); }) == ErrorCode::shape_mismatch);

  bad = manifest;
  bad["tensors"].push_back(bad["tensors"][0]);
  bad["tensors"][1]["name"] = "y";
  write(bad);
  CHECK(error_code_of([&] { load_container(dir / "t.json"); }) == ErrorCode::manifest_error);

  CHECK(error_code_of([&] { load_container(dir / "missing.json"); }) == ErrorCode::io_error);
}

TEST_CASE("model and calibration containers") {
  const auto dir = scratch_dir("model");
  const auto model = generate_mlp({16, 8, 4}, 52);
  CHECK(model.layers.size() == 2);
  CHECK(model.layers[0].name == "fc1");
  CHECK(model.layers[1].input == "fc1");
  CHECK(model.layers[0].activation == Activation::relu);
  CHECK(model.layers[1].activation == Activation::none);
  save_model(dir / "m.json", model);
  const auto back = load_model(dir / "m.json");
  REQUIRE(back.layers.size() == 2);
  for (std::size_t l = 0; l < 2; ++l) {
    CHECK(back.layers[l].name == model.layers[l].name);
    CHECK(bitwise_equal(back.layers[l].weight, model.layers[l].weight));
    CHECK(back.layers[l].activation == model.layers[l].activation);
  }
  const auto x = generate_calibration(10, 16, 53);
  save_calibration(dir / "c.json", x);
  CHECK(bitwise_equal(load_calibration(dir / "c.json"), x));
  CHECK(error_code_of([&] { load_model(dir / "c.json"); }).has_value());
}

TEST_CASE("pipeline writes consistent artifacts") {
  const auto dir = scratch_dir("prune");
  const auto model = generate_mlp({16, 8, 4}, 54);
  const auto x = generate_calibration(40, 16, 55);
  const auto out = run_pipeline(model, x, small_options(false), "prune", dir);
  for (const char* f : {"report.json", "permutations.json", "pruned.json", "pruned.bin", "fc1.pnmc", "fc2.pnmc"})
    CHECK(fs::exists(dir / f));
  CHECK(load_compressed(dir / "fc1.pnmc") == out.folded.compressed[0]);
  const auto pruned = load_model(dir / "pruned.json");
  CHECK(bitwise_equal(pruned.layers[1].weight, out.folded.model.layers[1].weight));
  const auto sidecar = parse_sidecar_json(read_text(dir / "permutations.json"));
  CHECK(sidecar[0].perm == out.folded.input_gather);
  const auto report = nlohmann::json::parse(read_text(dir / "report.json"));
  CHECK(report["report_version"] == kReportVersion);
  CHECK(report["command"] == "prune");
  CHECK(report["layers"].size() == 2);
  for (const auto& l : out.report.layers) {
    CHECK(l.mask_valid);
    CHECK(l.mask_density == 0.5);
    CHECK_FALSE(l.oracle_loss.has_value());
  }
  // Folded inference from the written artifacts matches the sparse model.
  FoldedModel<float> reloaded{pruned, sidecar[0].perm, sidecar, {}};
  CHECK(folded_forward(reloaded, x) == folded_forward(out.folded, x));
}

TEST_CASE("pipeline supports other patterns and rejects misaligned blocks") {
  const auto model = generate_mlp({16, 8}, 56);
  const auto x = generate_calibration(24, 16, 57);
  auto o = small_options(false);
  o.nm = NMConfig::parse("4:8");
  const auto out = run_pipeline(model, x, o, "prune");
  CHECK(out.report.layers[0].mask_valid);
  CHECK_FALSE(find_weight_violation(out.folded.model.layers[0].weight, o.nm).has_value());

  o.nm = NMConfig::parse("3:4");
  o.train.block_size = 6;
  CHECK(error_code_of([&] { run_pipeline(model, x, o, "prune"); }) == ErrorCode::contract_violation);
}

TEST_CASE("reports are deterministic apart from timing") {
  const auto model = generate_mlp({16, 8, 4}, 58);
  const auto x = generate_calibration(32, 16, 59);
  for (const auto precision : {Precision::f32, Precision::f64}) {
    auto o = small_options(true);
    o.precision = precision;
    const auto a = run_pipeline(model, x, o, "compare");
    const auto b = run_pipeline(model, x, o, "compare");
    CHECK(report_json(a.report, false) == report_json(b.report, false));
    CHECK(report_json(a.report, false).find("timing") == std::string::npos);
    CHECK(report_json(a.report).find("timing") != std::string::npos);
  }
}

TEST_CASE("the oracle bounds every method from below") {
  const auto model = generate_mlp({16, 8, 4}, 60);
  const auto x = generate_calibration(32, 16, 61);
  for (const auto mode : {TrainMode::layerwise, TrainMode::endtoend}) {
    auto o = small_options(true);
    o.precision = Precision::f64;
    o.train.mode = mode;
    const auto out = run_pipeline(model, x, o, "compare");
    CHECK(out.report.layers[0].oracle_evaluated == 35 * 35);
    CHECK(out.report.layers[1].oracle_evaluated == 35);
    for (const auto& l : out.report.layers) {
      REQUIRE(l.oracle_loss.has_value());
      CHECK(*l.oracle_loss <= l.identity_loss + 1e-12);
      CHECK(*l.oracle_loss <= l.heuristic_cp_loss + 1e-12);
      CHECK(*l.oracle_loss <= l.permllm_loss + 1e-12);
    }
  }
  auto o = small_options(true);
  o.oracle_limit = 100;
  const auto limited = run_pipeline(model, x, o, "compare");
  CHECK_FALSE(limited.report.layers[0].oracle_loss.has_value());
  CHECK_FALSE(limited.report.layers[0].oracle_note.empty());
  CHECK(limited.report.layers[1].oracle_loss.has_value());
}

TEST_CASE("stored score-versus-loss fixture replays") {
  const fs::path dir(PERMNM_FIXTURE_DIR);
  const auto inst = evaluate_score_trap(load_model(dir / "score_trap_model.json"),
                                  load_calibration(dir / "score_trap_calib.json"));
  CHECK(inst.heuristic_retained > inst.identity_retained);
  CHECK(inst.heuristic_loss > inst.identity_loss);
  CHECK(inst.heuristic_mse > inst.identity_mse);
  CHECK(inst.identity_retained == doctest::Approx(21.1632).epsilon(1e-4));
  CHECK(inst.heuristic_retained == doctest::Approx(22.2816).epsilon(1e-4));
  CHECK(inst.identity_loss == doctest::Approx(0.08676).epsilon(1e-3));
  CHECK(inst.heuristic_loss == doctest::Approx(0.10562).epsilon(1e-3));
}

TEST_CASE("fixture search is reproducible") {
  const auto inst = search_score_trap(0);
  CHECK(inst.trial == 9);
  const fs::path dir(PERMNM_FIXTURE_DIR);
  const auto stored = load_model(dir / "score_trap_model.json");
  CHECK(bitwise_equal(inst.model.layers[0].weight, stored.layers[0].weight));
  CHECK(bitwise_equal(inst.calibration, load_calibration(dir / "score_trap_calib.json")));
}

TEST_CASE("bench reports both timings") {
  const auto b = bench_permutation(64, 3, 8);
  CHECK(b.n == 64);
  CHECK(b.gather_seconds > 0.0);
  CHECK(b.matmul_seconds > 0.0);
  CHECK(b.ratio > 0.0);
  CHECK(error_code_of([] { bench_permutation(1, 3); }) == ErrorCode::contract_violation);
}

TEST_CASE("command line tool") {
  const char* cli = std::getenv("PERMNM_CLI");
  if (!cli) {
    MESSAGE("PERMNM_CLI not set; skipping");
    return;
  }
  const auto dir = scratch_dir("cli");
  auto run = [&](const std::string& args) {
    const std::string cmd = std::string(cli) + " " + args + " > " + (dir / "stdout.txt").string() +
                            " 2> " + (dir / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  };
  const std::string d = dir.string();
  CHECK(run("generate --kind mlp --dims 16,8,4 --samples 32 --seed 1 --out " + d) == 0);
  CHECK(run("prune --model " + d + "/model.json --calib " + d + "/calib.json --block-size 8 --steps 10 --out " + d +
            "/out") == 0);
  CHECK(fs::exists(dir / "out" / "report.json"));
  CHECK(fs::exists(dir / "out" / "fc2.pnmc"));

  CHECK(run("compare --model " + d + "/model.json --calib " + d + "/calib.json --block-size 8 --steps 10") == 0);
  const auto report = nlohmann::json::parse(read_text(dir / "stdout.txt"));
  CHECK(report["command"] == "compare");
  CHECK(report["layers"][0]["oracle_loss"].is_number());

  CHECK(run("compare --model " + d + "/model.json --calib " + d + "/calib.json --nm 3:4 --block-size 6") == 2);
  CHECK(read_text(dir / "stderr.txt").find("error[contract_violation]") != std::string::npos);
  CHECK(run("prune --model " + d + "/nothing.json --calib " + d + "/calib.json") == 2);
  CHECK(read_text(dir / "stderr.txt").find("error[io_error]") != std::string::npos);
  CHECK(run("prune --model x.json") != 0);
  CHECK(run("bench --n 2 --iterations 1") == 0);
  CHECK(read_text(dir / "stdout.txt").find("ratio=") != std::string::npos);
}
