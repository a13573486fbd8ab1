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

#include "vcnef/run_config.hpp"

#include <cstdio>
#include <fstream>

#include "vcnef/checkpoint.hpp"
#include "vcnef/error.hpp"
#include "vcnef/json_util.hpp"
#include "vcnef/rng.hpp"

namespace vcnef {

using json = nlohmann::json;

namespace {

json ic_to_json(const IcConfig& c) {
  return {{"modes", c.modes}, {"max_mode", c.max_mode}, {"amp_min", c.amp_min}, {"amp_max", c.amp_max},
          {"length", c.length}};
}

IcConfig ic_from_json(const json& j) {
  const std::string where = "data.ic";
  require_known_keys(j, {"modes", "max_mode", "amp_min", "amp_max", "length"}, where);
  IcConfig c;
  read_opt(j, "modes", c.modes, where);
  read_opt(j, "max_mode", c.max_mode, where);
  read_opt(j, "amp_min", c.amp_min, where);
  read_opt(j, "amp_max", c.amp_max, where);
  read_opt(j, "length", c.length, where);
  return c;
}

json eval_to_json(const EvalSettings& e) {
  return {{"start", e.start},
          {"mode", e.mode},
          {"absolute_times", e.absolute_times},
          {"spatial_zssr", e.spatial_zssr},
          {"temporal_zssr", e.temporal_zssr},
          {"bench_steps", e.bench_steps},
          {"bench_mode", e.bench_mode},
          {"bench_dt", e.bench_dt},
          {"bench_warmups", e.bench_warmups},
          {"bench_runs", e.bench_runs}};
}

EvalSettings eval_from_json(const json& j) {
  const std::string where = "eval";
  require_known_keys(j, {"start", "mode", "absolute_times", "spatial_zssr", "temporal_zssr", "bench_steps",
                         "bench_mode", "bench_dt", "bench_warmups", "bench_runs"},
                     where);
  EvalSettings e;
  read_opt(j, "start", e.start, where);
  read_opt(j, "mode", e.mode, where);
  read_opt(j, "absolute_times", e.absolute_times, where);
  read_opt(j, "spatial_zssr", e.spatial_zssr, where);
  read_opt(j, "temporal_zssr", e.temporal_zssr, where);
  read_opt(j, "bench_steps", e.bench_steps, where);
  read_opt(j, "bench_mode", e.bench_mode, where);
  read_opt(j, "bench_dt", e.bench_dt, where);
  read_opt(j, "bench_warmups", e.bench_warmups, where);
  read_opt(j, "bench_runs", e.bench_runs, where);
  parse_mode(e.mode);
  if (e.bench_mode != "both") parse_mode(e.bench_mode);
  if (e.bench_steps.empty() || e.bench_runs == 0 || !(e.bench_dt > 0.0)) {
    throw Error(ErrorCode::kConfig, "eval: bench needs steps, runs >= 1 and dt > 0");
  }
  return e;
}

}  // namespace

RolloutMode parse_mode(const std::string& s) {
  if (s == "parallel") return RolloutMode::kParallel;
  if (s == "sequential") return RolloutMode::kSequential;
  throw Error(ErrorCode::kConfig, "unknown rollout mode '" + s + "'");
}

json data_config_to_json(const DataConfig& c) {
  return {{"pde", c.pde},         {"n_samples", c.n_samples}, {"s", c.s},
          {"nt", c.nt},           {"t_final", c.t_final},     {"params", c.params},
          {"ic", ic_to_json(c.ic)}, {"x_min", c.x_min},       {"solver_s", c.solver_s},
          {"dt_solver", c.dt_solver}};
}

DataConfig data_config_from_json(const json& j) {
  const std::string where = "data";
  require_known_keys(j, {"pde", "n_samples", "s", "nt", "t_final", "params", "ic", "x_min", "solver_s", "dt_solver"},
                     where);
  DataConfig c;
  read_opt(j, "pde", c.pde, where);
  read_opt(j, "n_samples", c.n_samples, where);
  read_opt(j, "s", c.s, where);
  read_opt(j, "nt", c.nt, where);
  read_opt(j, "t_final", c.t_final, where);
  read_opt(j, "params", c.params, where);
  if (j.contains("ic")) c.ic = ic_from_json(j["ic"]);
  read_opt(j, "x_min", c.x_min, where);
  read_opt(j, "solver_s", c.solver_s, where);
  read_opt(j, "dt_solver", c.dt_solver, where);
  return c;
}

std::uint64_t RunConfig::data_seed() const { return derive_seed(seed, std::string_view("data")); }

void RunConfig::resolve() {
  model.seed = derive_seed(seed, std::string_view("init"));
  train.seed = derive_seed(seed, std::string_view("train"));
  model.t_norm = data.t_final;
  model.validate();
  train.validate();
  if (eval.start + 1 >= data.nt) throw Error(ErrorCode::kConfig, "eval.start leaves no target frames");
}

json run_config_to_json(const RunConfig& c) {
  json m = model_config_to_json(c.model);
  m.erase("seed");
  m.erase("t_norm");
  json t = train_config_to_json(c.train);
  t.erase("seed");
  return {{"seed", c.seed},
          {"data", data_config_to_json(c.data)},
          {"model", m},
          {"train", t},
          {"eval", eval_to_json(c.eval)},
          {"out", c.out}};
}

RunConfig run_config_from_json(const json& j) {
  require_known_keys(j, {"seed", "data", "model", "train", "eval", "out"}, "config");
  RunConfig c;
  read_opt(j, "seed", c.seed, "config");
  read_opt(j, "out", c.out, "config");
  if (j.contains("data")) c.data = data_config_from_json(j["data"]);
  if (j.contains("model")) {
    const auto& m = j["model"];
    if (m.is_object() && (m.contains("seed") || m.contains("t_norm"))) {
      throw Error(ErrorCode::kConfig, "model: seed and t_norm derive from the root seed and data.t_final");
    }
    c.model = model_config_from_json(m);
  }
  if (j.contains("train")) {
    if (j["train"].is_object() && j["train"].contains("seed")) {
      throw Error(ErrorCode::kConfig, "train: seed derives from the root seed");
    }
    c.train = train_config_from_json(j["train"]);
  }
  if (j.contains("eval")) c.eval = eval_from_json(j["eval"]);
  c.resolve();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kConfig, path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

RunConfig apply_override(const RunConfig& c, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw Error(ErrorCode::kConfig, "override '" + assignment + "' is not key=value");
  }
  const std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  json j = run_config_to_json(c);
  json* node = &j;
  std::size_t from = 0;
  while (true) {
    const auto dot = key.find('.', from);
    const std::string part = key.substr(from, dot == std::string::npos ? std::string::npos : dot - from);
    if (dot == std::string::npos) {
      (*node)[part] = value;
      break;
    }
    node = &(*node)[part];
    from = dot + 1;
  }
  return run_config_from_json(j);
}

std::string config_hash(const RunConfig& c) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(run_config_to_json(c).dump())));
  return buf;
}

}  // namespace vcnef
