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

// The four command-line workflows. Each writes fixed file names under `out`
// and reports progress through `log`.

#include <filesystem>
#include <functional>
#include <string>

#include "vcnef/run_config.hpp"

namespace vcnef {

using LogFn = std::function<void(const std::string&)>;

namespace files {
inline constexpr const char* kDataset = "dataset.vcnf";
inline constexpr const char* kConfig = "config.json";
inline constexpr const char* kCheckpoint = "checkpoint.vcnp";
inline constexpr const char* kTrainLog = "train_log.csv";
inline constexpr const char* kReport = "report.json";
inline constexpr const char* kTemporal = "temporal_error.csv";
inline constexpr const char* kHeatmap = "heatmap.csv";
inline constexpr const char* kPredictions = "predictions.vcnf";
inline constexpr const char* kBench = "bench.csv";
}  // namespace files

void cmd_generate(const RunConfig& cfg, const std::filesystem::path& out, const LogFn& log);

/// With `resume`, continues from out/checkpoint.vcnp when it exists.
/// `stop_epoch` > 0 ends the run once that many epochs are done; the
/// learning-rate schedule still spans cfg.train.epochs.
void cmd_train(const RunConfig& cfg, const std::filesystem::path& data, const std::filesystem::path& out,
               bool resume, const LogFn& log, std::size_t stop_epoch = 0);

/// Standard evaluation plus the super-resolution studies enabled in cfg.eval.
void cmd_eval(const RunConfig& cfg, const std::filesystem::path& checkpoint, const std::filesystem::path& data,
              const std::filesystem::path& out, const LogFn& log);

/// Rolls out sample 0 of `data`, or of a fresh one-sample dataset when `data`
/// is empty.
void cmd_bench(const RunConfig& cfg, const std::filesystem::path& checkpoint, const std::filesystem::path& data,
               const std::filesystem::path& out, const LogFn& log);

}  // namespace vcnef
