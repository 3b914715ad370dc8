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

#include "permnm/report.hpp"

#include <json.hpp>

#include "permnm/error.hpp"

namespace permnm {

std::string_view to_string(Precision p) {
  return p == Precision::f32 ? "f32" : "f64";
}

Precision parse_precision(std::string_view text) {
  if (text == "f32") return Precision::f32;
  if (text == "f64") return Precision::f64;
  fail(ErrorCode::contract_violation, "unknown precision '" + std::string(text) + "'");
}

namespace {

using Json = nlohmann::ordered_json;

Json optional_number(const std::optional<double>& v) {
  return v ? Json(*v) : Json(nullptr);
}

Json config_json(const Report& r) {
  const auto& c = r.config;
  Json partial = nullptr;
  if (c.partial_layers) partial = *c.partial_layers;
  return {{"nm", r.nm.to_string()},
          {"metric", to_string(c.metric)},
          {"block_size", c.block_size},
          {"steps", c.steps},
          {"lr", c.learning_rate},
          {"sinkhorn_iters", c.sinkhorn_iters},
          {"tau_start", c.tau_start},
          {"tau_end", c.tau_end},
          {"mode", to_string(c.mode)},
          {"partial_layers", partial},
          {"score_path_gradient", c.score_path_gradient},
          {"init_stddev", c.init_stddev},
          {"precision", to_string(r.precision)}};
}

Json layer_json(const LayerReport& l) {
  return {{"name", l.name},
          {"c_out", l.c_out},
          {"c_in", l.c_in},
          {"block_boundaries", l.block_boundaries},
          {"learned", l.learned},
          {"best_step", l.best_step ? Json(*l.best_step) : Json(nullptr)},
          {"identity_loss", l.identity_loss},
          {"heuristic_cp_loss", l.heuristic_cp_loss},
          {"permllm_loss", l.permllm_loss},
          {"oracle_loss", optional_number(l.oracle_loss)},
          {"retained_score",
           {{"identity", l.identity_retained},
            {"heuristic_cp", l.heuristic_cp_retained},
            {"permllm", l.permllm_retained},
            {"oracle", optional_number(l.oracle_retained)}}},
          {"oracle_evaluated", l.oracle_evaluated},
          {"oracle_note", l.oracle_note},
          {"mask_density", l.mask_density},
          {"mask_valid", l.mask_valid}};
}

}  // namespace

std::string report_json(const Report& r, bool include_timing) {
  Json layers = Json::array();
  for (const auto& l : r.layers) layers.push_back(layer_json(l));
  Json doc = {{"report_version", kReportVersion},
              {"command", r.command},
              {"seed", r.config.seed},
              {"mode", to_string(r.resolved_mode)},
              {"config", config_json(r)},
              {"model",
               {{"identity_loss", r.model_identity_loss},
                {"heuristic_cp_loss", r.model_heuristic_cp_loss},
                {"permllm_loss", r.model_permllm_loss}}},
              {"layers", std::move(layers)},
              {"diverged", r.diverged},
              {"diagnostic", r.diagnostic}};
  if (include_timing) {
    doc["timing"] = {{"train_seconds", r.timing.train_seconds},
                     {"oracle_seconds", r.timing.oracle_seconds},
                     {"total_seconds", r.timing.total_seconds}};
  }
  return doc.dump(2) + "\n";
}

}  // namespace permnm
