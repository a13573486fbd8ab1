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
#include <functional>
#include <json.hpp>
#include <random>
#include <string>
#include <vector>

#include "vcnef/autodiff.hpp"
#include "vcnef/model.hpp"
#include "vcnef/pde_data.hpp"

namespace vcnef {

struct OneCycle {
  double pct_peak = 0.2;
  double start_div = 1e-3;
  double final_div = 1e-4;
};

struct TrainConfig {
  std::size_t epochs = 40;
  std::size_t batch_size = 16;
  double max_lr = 3e-3;
  OneCycle schedule;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  bool randomized_starts = false;
  std::size_t starts_per_epoch = 10;
  bool absolute_times = false;  // query times measured from t_0 instead of the start frame
  bool clip = false;
  double clip_norm = 1.0;
  std::string precision = "f32";  // "f32" | "f64"

  void validate() const;
};

/// Cosine warm-up from max_lr * start_div to max_lr at pct_peak * total,
/// cosine decay to max_lr * final_div at total.
double one_cycle_lr(std::size_t step, std::size_t total, double max_lr, const OneCycle& cfg);

/// [0] followed by min(k, N_t - 1) distinct frames drawn from 1..N_t-1.
std::vector<std::size_t> starting_point_schedule(std::mt19937_64& rng, std::size_t nt, std::size_t k = 10);

/// Mean of squared differences over every element.
template <typename T>
double mse_loss(const Array<T>& pred, const Array<T>& target);
template <typename T>
Var<T> mse_loss(const Var<T>& pred, const Var<T>& target);

/// Model input for trajectory `i` conditioned on frame `frame`.
template <typename T>
FieldInput<T> field_input(const Dataset& d, std::size_t i, std::size_t frame);

/// Target frames start+1.. of trajectory i as [N_t - 1 - start, s, c].
template <typename T>
Array<T> target_frames(const Trajectory& tr, std::size_t start);

/// Query times for frames start+1..: relative to the start frame by default.
std::vector<double> query_times(const std::vector<double>& times, std::size_t start, bool absolute);

template <typename T>
struct TrainState {
  ParameterStore<T> store;
  ParamMap<T> m, v;       // Adam moments, one per trainable parameter
  std::uint64_t step = 0;  // optimizer steps taken
  std::uint64_t epoch = 0;
  std::uint64_t seed = 0;  // training root; epoch schedules derive from it
  std::mt19937_64 rng;     // batch shuffling
};

template <typename T>
TrainState<T> make_train_state(ParameterStore<T> store, std::uint64_t seed);

struct StepRecord {
  std::uint64_t epoch, step;
  double lr, loss, grad_norm, wall_ms;
};

struct AccessRecord {
  std::uint64_t step;
  std::size_t sample, frame;  // conditioning frame read by the step
};

struct TrainLog {
  std::vector<StepRecord> steps;
  std::vector<AccessRecord> access;
  std::vector<std::vector<std::size_t>> schedules;  // drawn starting points per epoch
  bool record_access = false;
};

/// Starting points drawn for `epoch`: {0} unless randomized. A pure function
/// of (seed, epoch), so the step count of a run is known before it starts.
std::vector<std::size_t> epoch_schedule(const TrainConfig& cfg, std::uint64_t seed, std::uint64_t epoch,
                                        std::size_t nt);

/// Optimizer steps in the whole run. The last frame has no later targets, so
/// drawing it as a start contributes no steps.
std::size_t total_steps(const TrainConfig& cfg, std::uint64_t seed, std::size_t n_samples, std::size_t nt);

/// One Adam update on the mean loss of `samples` conditioned on `start`.
template <typename T>
StepRecord train_step(TrainState<T>& state, const TrainConfig& cfg, const Dataset& d,
                      const std::vector<std::size_t>& samples, std::size_t start, double lr,
                      TrainLog* log = nullptr);

/// Runs epochs state.epoch .. min(cfg.epochs, stop_epoch) - 1. `on_epoch`
/// fires after each epoch with the mean loss. Stopping early keeps the
/// learning-rate schedule of the full run, so a later call resumes it.
template <typename T>
void train(TrainState<T>& state, const TrainConfig& cfg, const Dataset& d, TrainLog* log = nullptr,
           const std::function<void(const TrainState<T>&, double)>& on_epoch = {},
           std::size_t stop_epoch = static_cast<std::size_t>(-1));

/// CSV with header `epoch,step,lr,loss,grad_norm,wall_ms`; appends rows.
void append_train_csv(const std::filesystem::path& path, const std::vector<StepRecord>& rows);

nlohmann::json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

/// Parameters, Adam moments, counters and the RNG state.
template <typename T>
void save_train_state(const std::filesystem::path& path, const TrainState<T>& state,
                      const nlohmann::json& extra = nlohmann::json::object());
template <typename T>
TrainState<T> load_train_state(const std::filesystem::path& path, nlohmann::json* meta = nullptr);

}  // namespace vcnef
