// Copyright 2026 The VCNeF Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <string>
#include <vector>

#include "vcnef/evaluation.hpp"
#include "vcnef/model.hpp"
#include "vcnef/pde_data.hpp"
#include "vcnef/training.hpp"

namespace vcnef {

struct EvalSettings {
  std::size_t start = 0;
  std::string mode = "parallel";  // "parallel" | "sequential"
  bool absolute_times = false;
  std::size_t spatial_zssr = 0;   // fine/train resolution factor, 0 = off
  std::size_t temporal_zssr = 0;  // dense/coarse time factor, 0 = off
  std::vector<std::size_t> bench_steps{40, 80, 120, 160, 200, 240};
  std::string bench_mode = "both";  // "parallel" | "sequential" | "both"
  double bench_dt = 0.05;
  std::size_t bench_warmups = 3;
  std::size_t bench_runs = 5;
};

/// Every setting of a run. The root seed is split into independent data,
/// init and train streams when the config is resolved.
struct RunConfig {
  std::uint64_t seed = 0;
  DataConfig data;
  ModelConfig model;
  TrainConfig train;
  EvalSettings eval;
  std::string out = "out";

  std::uint64_t data_seed() const;
  /// Copies the derived init/train seeds into model and train and validates.
  void resolve();
};

nlohmann::json data_config_to_json(const DataConfig& c);
DataConfig data_config_from_json(const nlohmann::json& j);

nlohmann::json run_config_to_json(const RunConfig& c);
/// Strict: unknown keys anywhere raise kConfig listing them. The result is
/// resolved.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

/// Applies "section.key=value" (value parsed as JSON, bare strings allowed)
/// on top of a config's JSON form, then reparses.
RunConfig apply_override(const RunConfig& c, const std::string& assignment);

/// 16 hex digits of FNV-1a over the canonical JSON dump.
std::string config_hash(const RunConfig& c);

RolloutMode parse_mode(const std::string& s);

}  // namespace vcnef
