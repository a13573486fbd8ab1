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

// vcnef generate|train|eval|bench --config <path> [overrides]

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <string>
#include <vector>

#include "vcnef/vcnef.h"

namespace {

void print_line(const char* line, void*) {
  std::printf("%s\n", line);
  std::fflush(stdout);
}

int report(vcnef_status st, const char* what) {
  if (st == VCNEF_OK) return 0;
  std::fprintf(stderr, "vcnef %s: %s: %s\n", what, vcnef_status_name(st), vcnef_last_error());
  return static_cast<int>(st);
}

std::string join(const std::vector<std::size_t>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s + "]";
}

struct Handles {
  vcnef_config* cfg = nullptr;
  ~Handles() { vcnef_config_free(cfg); }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Vectorized conditional neural fields for time-dependent PDEs"};
  app.require_subcommand(1);
  app.set_version_flag("--version", vcnef_version());

  std::string config_path, out_dir, data_path, checkpoint;
  std::vector<std::string> overrides;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON run config")->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "Output directory (default: config out)");
    sub->add_option("--set", overrides, "Override as section.key=value, repeatable");
  };

  auto* gen = app.add_subcommand("generate", "Write a dataset");
  common(gen);

  bool randomized = false, resume = false;
  auto* tr = app.add_subcommand("train", "Train a model on a dataset");
  common(tr);
  tr->add_option("--data", data_path, "Training dataset")->required()->check(CLI::ExistingFile);
  tr->add_flag("--randomized-starts", randomized, "Draw conditioning frames per epoch");
  tr->add_flag("--resume", resume, "Continue from the checkpoint in --out");
  std::size_t stop_after = 0;
  tr->add_option("--stop-after", stop_after, "End after this many epochs; resume later with --resume");

  std::size_t spatial = 0, temporal = 0;
  std::string mode;
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
  common(ev);
  ev->add_option("--checkpoint", checkpoint, "Checkpoint")->required()->check(CLI::ExistingFile);
  ev->add_option("--data", data_path, "Test dataset")->required()->check(CLI::ExistingFile);
  ev->add_option("--spatial-zssr", spatial, "Also evaluate at this multiple of the grid");
  ev->add_option("--temporal-zssr", temporal, "Also query this many times more often");
  ev->add_option("--mode", mode, "Rollout mode")->check(CLI::IsMember({"parallel", "sequential"}));

  std::vector<std::size_t> steps;
  auto* be = app.add_subcommand("bench", "Time parallel and sequential rollouts");
  common(be);
  be->add_option("--checkpoint", checkpoint, "Checkpoint")->required()->check(CLI::ExistingFile);
  be->add_option("--data", data_path, "Dataset whose first sample is rolled out")->check(CLI::ExistingFile);
  be->add_option("--steps", steps, "Rollout lengths")->delimiter(',');
  be->add_option("--mode", mode, "Rollout mode")->check(CLI::IsMember({"parallel", "sequential", "both"}));

  CLI11_PARSE(app, argc, argv);

  Handles h;
  vcnef_status st = config_path.empty() ? vcnef_config_default(&h.cfg) : vcnef_config_load(config_path.c_str(), &h.cfg);
  if (st != VCNEF_OK) return report(st, "config");

  if (randomized) overrides.push_back("train.randomized_starts=true");
  if (spatial) overrides.push_back("eval.spatial_zssr=" + std::to_string(spatial));
  if (temporal) overrides.push_back("eval.temporal_zssr=" + std::to_string(temporal));
  if (!steps.empty()) overrides.push_back("eval.bench_steps=" + join(steps));
  if (!mode.empty()) overrides.push_back((be->parsed() ? "eval.bench_mode=\"" : "eval.mode=\"") + mode + "\"");
  for (const auto& o : overrides) {
    if ((st = vcnef_config_override(h.cfg, o.c_str())) != VCNEF_OK) return report(st, "config");
  }
  if (out_dir.empty()) {
    std::size_t n = 0;
    vcnef_config_dump(h.cfg, nullptr, 0, &n);
    std::string text(n, '\0');
    vcnef_config_dump(h.cfg, text.data(), n, &n);
    text.pop_back();
    out_dir = nlohmann::json::parse(text).value("out", std::string("out"));
  }

  if (gen->parsed()) return report(vcnef_cmd_generate(h.cfg, out_dir.c_str(), print_line, nullptr), "generate");
  if (tr->parsed()) {
    return report(vcnef_cmd_train(h.cfg, data_path.c_str(), out_dir.c_str(), resume, stop_after, print_line, nullptr), "train");
  }
  if (ev->parsed()) {
    return report(vcnef_cmd_eval(h.cfg, checkpoint.c_str(), data_path.c_str(), out_dir.c_str(), print_line, nullptr),
                  "eval");
  }
  return report(vcnef_cmd_bench(h.cfg, checkpoint.c_str(), data_path.empty() ? nullptr : data_path.c_str(),
                                out_dir.c_str(), print_line, nullptr),
                "bench");
}
