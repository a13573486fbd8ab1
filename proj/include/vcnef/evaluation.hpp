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

#include <cstddef>
#include <filesystem>
#include <json.hpp>
#include <string>
#include <vector>

#include "vcnef/array.hpp"
#include "vcnef/model.hpp"
#include "vcnef/pde_data.hpp"

namespace vcnef {

// Metrics take ground truth Y and prediction Yhat of shape [N_t, s, c].

/// Mean over (t, c) of ||Y - Yhat||_2 / ||Y||_2 along space. Slices whose
/// ground-truth norm is zero are left out and counted in `skipped`.
double nrmse(const Array<double>& y, const Array<double>& yhat, std::size_t* skipped = nullptr);

/// Mean over (t, c) of the RMS error at the first and last spatial index.
double brmse(const Array<double>& y, const Array<double>& yhat);

double mse(const Array<double>& y, const Array<double>& yhat);

inline constexpr double kHeatmapSentinel = -1.0;

/// |y - yhat| / |y| for one channel as [N_t, s]; cells with y = 0 hold
/// kHeatmapSentinel.
Array<double> error_heatmap(const Array<double>& y, const Array<double>& yhat, std::size_t channel = 0);

/// Adds `map` into `sum` and counts valid cells, skipping sentinels.
void accumulate_heatmap(Array<double>& sum, std::vector<std::size_t>& count, const Array<double>& map);

/// The conditioning frame u0 [s, c] repeated n times.
Array<double> persistence_baseline(const Array<double>& u0, std::size_t n);

/// Per-(t, x) mean of the target frames start+1.. over a dataset.
Array<double> mean_predictor(const Dataset& train, std::size_t start = 0);

struct TimingRecord {
  std::string mode;  // "parallel" | "sequential"
  std::size_t n_steps = 0;
  double wall_ms = 0.0;         // median of the measured runs
  std::size_t peak_bytes = 0;   // transient array memory beyond the output
};

struct MeanStd {
  double mean = 0.0, std = 0.0;  // population std
};

MeanStd mean_std(const std::vector<double>& v);

struct EvalReport {
  std::string label;
  std::vector<double> nrmse, brmse;  // per test sample
  std::vector<double> baseline_nrmse;  // persistence, per test sample
  std::size_t skipped_slices = 0;
  MeanStd nrmse_agg, brmse_agg, baseline_agg;
  std::vector<double> times;  // query times, relative to the conditioning frame
  std::vector<double> temporal_mean, temporal_std;  // nRMSE per query time across samples
  Array<double> heatmap;  // [N_t, s], sentinel where no sample had a valid cell
  std::vector<TimingRecord> timing;

  /// Recomputes the aggregates from the per-sample values.
  void aggregate();
};

/// Mean and std of a metric over independently trained models.
MeanStd aggregate_seeds(const std::vector<EvalReport>& reports, double MeanStd::*field = &MeanStd::mean);

struct EvalOptions {
  std::size_t start = 0;  // conditioning frame
  RolloutMode mode = RolloutMode::kParallel;
  bool absolute_times = false;
};

/// Runs the model on every test sample. When `predictions` is given it
/// receives a dataset with the same metadata whose frames after `start`
/// hold the model output.
template <typename T>
EvalReport evaluate(const ParameterStore<T>& store, const Dataset& test, const EvalOptions& opts = {},
                    Dataset* predictions = nullptr);

/// Throws kMetadata when the model cannot consume `d` (dimension, channel or
/// parameter count, patch divisibility).
void check_compatible(const ModelConfig& cfg, const Dataset& d);

struct SpatialZssr {
  EvalReport train_res, fine;
  double ratio = 0.0;  // nRMSE(fine) / nRMSE(train_res)
};

/// Evaluates on `fine` and on its subsample at `train_res`.
template <typename T>
SpatialZssr eval_spatial_zssr(const ParameterStore<T>& store, const Dataset& fine, std::size_t train_res,
                              const EvalOptions& opts = {});

struct TemporalZssr {
  EvalReport coarse, dense;
  double ratio = 0.0;            // nRMSE(dense) / nRMSE(coarse)
  double shared_max_diff = 0.0;  // dense vs coarse query at shared timestamps
};

/// `dense` holds N_t_dense frames; the coarse grid is every k-th frame with
/// (N_t_dense - 1) = k (coarse_nt - 1).
template <typename T>
TemporalZssr eval_temporal_zssr(const ParameterStore<T>& store, const Dataset& dense, std::size_t coarse_nt,
                                const EvalOptions& opts = {});

struct BenchOptions {
  std::vector<std::size_t> steps{40, 80, 120, 160, 200, 240};
  std::vector<RolloutMode> modes{RolloutMode::kParallel, RolloutMode::kSequential};
  std::size_t warmups = 3, runs = 5;
  double dt = 0.05;        // spacing of the query times
  double tolerance = 1e-6;  // parallel vs sequential gate
};

/// Times rollouts of `in` for every (mode, n_steps). Before any timing the
/// parallel and sequential outputs are compared; a mismatch throws
/// kMismatch.
template <typename T>
std::vector<TimingRecord> bench_rollout(const ParameterStore<T>& store, const FieldInput<T>& in,
                                        const BenchOptions& opts = {});

/// report.json content: aggregates, per-sample values and `extra` fields.
nlohmann::json report_to_json(const EvalReport& r);

void write_temporal_csv(const std::filesystem::path& path, const EvalReport& r);
void write_heatmap_csv(const std::filesystem::path& path, const Array<double>& heatmap);
void write_bench_csv(const std::filesystem::path& path, const std::vector<TimingRecord>& rows);

}  // namespace vcnef
