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

#include "vcnef/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "vcnef/error.hpp"
#include "vcnef/parallel.hpp"
#include "vcnef/training.hpp"

namespace vcnef {

namespace {

void require_same(const Array<double>& y, const Array<double>& yhat, const char* what) {
  if (y.rank() != 3 || y.shape() != yhat.shape()) {
    throw Error(ErrorCode::kShape, std::string(what) + ": expected matching [N_t, s, c], got " +
                                       shape_string(y.shape()) + " and " + shape_string(yhat.shape()));
  }
}

std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out.precision(17);
  return out;
}

const char* mode_name(RolloutMode m) { return m == RolloutMode::kParallel ? "parallel" : "sequential"; }

// nRMSE of time slice k alone, averaged over channels with non-zero truth.
double slice_nrmse(const Array<double>& y, const Array<double>& yhat, std::size_t k) {
  const std::size_t s = y.dim(1), c = y.dim(2);
  double total = 0.0;
  std::size_t used = 0;
  for (std::size_t ch = 0; ch < c; ++ch) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < s; ++i) {
      const std::size_t at = (k * s + i) * c + ch;
      const double e = y[at] - yhat[at];
      num += e * e;
      den += y[at] * y[at];
    }
    if (den == 0.0) continue;
    total += std::sqrt(num / den);
    ++used;
  }
  return used ? total / static_cast<double>(used) : 0.0;
}

}  // namespace

double nrmse(const Array<double>& y, const Array<double>& yhat, std::size_t* skipped) {
  require_same(y, yhat, "nrmse");
  const std::size_t nt = y.dim(0), s = y.dim(1), c = y.dim(2);
  double total = 0.0;
  std::size_t used = 0, zero = 0;
  for (std::size_t k = 0; k < nt; ++k) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      double num = 0.0, den = 0.0;
      for (std::size_t i = 0; i < s; ++i) {
        const std::size_t at = (k * s + i) * c + ch;
        const double e = y[at] - yhat[at];
        num += e * e;
        den += y[at] * y[at];
      }
      if (den == 0.0) {
        ++zero;
        continue;
      }
      total += std::sqrt(num / den);
      ++used;
    }
  }
  if (skipped) *skipped = zero;
  return used ? total / static_cast<double>(used) : 0.0;
}

double brmse(const Array<double>& y, const Array<double>& yhat) {
  require_same(y, yhat, "brmse");
  const std::size_t nt = y.dim(0), s = y.dim(1), c = y.dim(2);
  if (s < 2) throw Error(ErrorCode::kShape, "brmse: needs at least two grid points");
  double total = 0.0;
  for (std::size_t k = 0; k < nt; ++k) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t a = k * s * c + ch, b = (k * s + s - 1) * c + ch;
      const double ea = y[a] - yhat[a], eb = y[b] - yhat[b];
      total += std::sqrt(0.5 * (ea * ea + eb * eb));
    }
  }
  return total / static_cast<double>(nt * c);
}

double mse(const Array<double>& y, const Array<double>& yhat) {
  if (y.shape() != yhat.shape()) throw Error(ErrorCode::kShape, "mse: shape mismatch");
  if (y.size() == 0) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double e = y[i] - yhat[i];
    total += e * e;
  }
  return total / static_cast<double>(y.size());
}

Array<double> error_heatmap(const Array<double>& y, const Array<double>& yhat, std::size_t channel) {
  require_same(y, yhat, "error_heatmap");
  const std::size_t nt = y.dim(0), s = y.dim(1), c = y.dim(2);
  if (channel >= c) throw Error(ErrorCode::kInvalidArgument, "error_heatmap: channel out of range");
  Array<double> out({nt, s});
  auto o = out.mutable_data();
  for (std::size_t k = 0; k < nt; ++k) {
    for (std::size_t i = 0; i < s; ++i) {
      const std::size_t at = (k * s + i) * c + channel;
      o[k * s + i] = y[at] == 0.0 ? kHeatmapSentinel : std::abs(y[at] - yhat[at]) / std::abs(y[at]);
    }
  }
  return out;
}

void accumulate_heatmap(Array<double>& sum, std::vector<std::size_t>& count, const Array<double>& map) {
  if (sum.size() == 0) {
    sum = Array<double>(map.shape());
    count.assign(map.size(), 0);
  }
  if (sum.shape() != map.shape() || count.size() != map.size()) {
    throw Error(ErrorCode::kShape, "accumulate_heatmap: shape mismatch");
  }
  auto o = sum.mutable_data();
  for (std::size_t i = 0; i < map.size(); ++i) {
    if (map[i] == kHeatmapSentinel) continue;
    o[i] += map[i];
    ++count[i];
  }
}

Array<double> persistence_baseline(const Array<double>& u0, std::size_t n) {
  if (u0.rank() != 2) throw Error(ErrorCode::kShape, "persistence_baseline: expected u0 as [s, c]");
  const std::size_t frame = u0.size();
  Array<double> out({n, u0.dim(0), u0.dim(1)});
  auto o = out.mutable_data();
  for (std::size_t k = 0; k < n; ++k) std::copy(u0.data().begin(), u0.data().end(), o.begin() + k * frame);
  return out;
}

Array<double> mean_predictor(const Dataset& train, std::size_t start) {
  if (train.size() == 0) throw Error(ErrorCode::kInvalidArgument, "mean_predictor: empty dataset");
  Array<double> sum = target_frames<double>(train.samples[0], start);
  auto o = sum.mutable_data();
  for (std::size_t n = 1; n < train.size(); ++n) {
    const auto t = target_frames<double>(train.samples[n], start);
    if (t.shape() != sum.shape()) throw Error(ErrorCode::kShape, "mean_predictor: ragged dataset");
    for (std::size_t i = 0; i < o.size(); ++i) o[i] += t[i];
  }
  for (auto& v : o) v /= static_cast<double>(train.size());
  return sum;
}

MeanStd mean_std(const std::vector<double>& v) {
  MeanStd r;
  if (v.empty()) return r;
  for (double x : v) r.mean += x;
  r.mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - r.mean) * (x - r.mean);
  r.std = std::sqrt(var / static_cast<double>(v.size()));
  return r;
}

void EvalReport::aggregate() {
  nrmse_agg = mean_std(nrmse);
  brmse_agg = mean_std(brmse);
  baseline_agg = mean_std(baseline_nrmse);
}

MeanStd aggregate_seeds(const std::vector<EvalReport>& reports, double MeanStd::*field) {
  std::vector<double> v;
  for (const auto& r : reports) v.push_back(r.nrmse_agg.*field);
  return mean_std(v);
}

void check_compatible(const ModelConfig& cfg, const Dataset& d) {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::kMetadata, "model/dataset mismatch: " + what); };
  if (cfg.dims != d.meta.dims) fail("model is " + std::to_string(cfg.dims) + "D, data is " + std::to_string(d.meta.dims) + "D");
  if (cfg.c != d.meta.c) fail("channel count " + std::to_string(cfg.c) + " vs " + std::to_string(d.meta.c));
  for (const auto& tr : d.samples) {
    if (tr.params.size() != cfg.j) {
      fail("parameter count " + std::to_string(cfg.j) + " vs " + std::to_string(tr.params.size()));
    }
  }
  if (cfg.dims == 2) {
    for (std::size_t e : d.meta.extents) {
      if (e % cfg.patch_large != 0 || e % cfg.patch_small != 0) fail("grid extent not divisible by the patch sizes");
    }
  }
}

template <typename T>
EvalReport evaluate(const ParameterStore<T>& store, const Dataset& test, const EvalOptions& opts,
                    Dataset* predictions) {
  check_compatible(store.config, test);
  if (test.size() == 0) throw Error(ErrorCode::kInvalidArgument, "evaluate: empty dataset");
  if (opts.start + 1 >= test.meta.nt) throw Error(ErrorCode::kInvalidArgument, "evaluate: start frame leaves no targets");
  const auto times = query_times(test.meta.times, opts.start, opts.absolute_times);
  const std::size_t n = test.size(), nq = times.size();

  EvalReport r;
  r.times = times;
  r.nrmse.resize(n);
  r.brmse.resize(n);
  r.baseline_nrmse.resize(n);
  std::vector<std::size_t> skipped(n);
  std::vector<Array<double>> preds(n), maps(n);
  std::vector<std::vector<double>> per_time(n);
  parallel_for(n, [&](std::size_t i) {
    const auto& tr = test.samples[i];
    const auto y = target_frames<double>(tr, opts.start);
    auto yhat = forward(store, field_input<T>(test, i, opts.start), times, opts.mode).template cast<double>();
    yhat = yhat.reshaped(y.shape());
    r.nrmse[i] = nrmse(y, yhat, &skipped[i]);
    r.brmse[i] = brmse(y, yhat);
    r.baseline_nrmse[i] = nrmse(y, persistence_baseline(tr.frame(opts.start), nq));
    maps[i] = error_heatmap(y, yhat);
    for (std::size_t k = 0; k < nq; ++k) per_time[i].push_back(slice_nrmse(y, yhat, k));
    preds[i] = std::move(yhat);
  });
  for (std::size_t v : skipped) r.skipped_slices += v;
  r.aggregate();

  for (std::size_t k = 0; k < nq; ++k) {
    std::vector<double> col;
    for (std::size_t i = 0; i < n; ++i) col.push_back(per_time[i][k]);
    const auto ms = mean_std(col);
    r.temporal_mean.push_back(ms.mean);
    r.temporal_std.push_back(ms.std);
  }

  Array<double> sum;
  std::vector<std::size_t> count;
  for (const auto& m : maps) accumulate_heatmap(sum, count, m);
  auto h = sum.mutable_data();
  for (std::size_t i = 0; i < h.size(); ++i) h[i] = count[i] ? h[i] / static_cast<double>(count[i]) : kHeatmapSentinel;
  r.heatmap = std::move(sum);

  if (predictions) {
    *predictions = test;
    for (std::size_t i = 0; i < n; ++i) {
      auto& tr = predictions->samples[i];
      const std::size_t frame = tr.s() * tr.c();
      auto o = tr.values.mutable_data();
      std::copy(preds[i].data().begin(), preds[i].data().end(), o.begin() + (opts.start + 1) * frame);
    }
  }
  return r;
}

template <typename T>
SpatialZssr eval_spatial_zssr(const ParameterStore<T>& store, const Dataset& fine, std::size_t train_res,
                              const EvalOptions& opts) {
  if (fine.meta.dims != 1) throw Error(ErrorCode::kInvalidArgument, "spatial super-resolution is 1D only");
  if (train_res == 0 || fine.meta.s % train_res != 0) {
    throw Error(ErrorCode::kInvalidArgument, "fine resolution must be a multiple of the training resolution");
  }
  SpatialZssr z;
  z.train_res = evaluate(store, subsample(fine, fine.meta.s / train_res, 1), opts);
  z.train_res.label = "s=" + std::to_string(train_res);
  z.fine = evaluate(store, fine, opts);
  z.fine.label = "s=" + std::to_string(fine.meta.s);
  z.ratio = z.fine.nrmse_agg.mean / z.train_res.nrmse_agg.mean;
  return z;
}

template <typename T>
TemporalZssr eval_temporal_zssr(const ParameterStore<T>& store, const Dataset& dense, std::size_t coarse_nt,
                                const EvalOptions& opts) {
  if (coarse_nt < 2 || (dense.meta.nt - 1) % (coarse_nt - 1) != 0) {
    throw Error(ErrorCode::kInvalidArgument, "dense times must contain the coarse times");
  }
  const std::size_t k = (dense.meta.nt - 1) / (coarse_nt - 1);
  TemporalZssr z;
  Dataset coarse_pred, dense_pred;
  z.coarse = evaluate(store, subsample(dense, 1, k), opts, &coarse_pred);
  z.coarse.label = "N_t=" + std::to_string(coarse_nt);
  EvalOptions dense_opts = opts;
  dense_opts.start = opts.start * k;
  z.dense = evaluate(store, dense, dense_opts, &dense_pred);
  z.dense.label = "N_t=" + std::to_string(dense.meta.nt);
  z.ratio = z.dense.nrmse_agg.mean / z.coarse.nrmse_agg.mean;

  for (std::size_t i = 0; i < dense.size(); ++i) {
    const auto& a = coarse_pred.samples[i].values;
    const auto& b = dense_pred.samples[i].values;
    const std::size_t frame = dense.meta.s * dense.meta.c;
    for (std::size_t f = opts.start + 1; f < coarse_nt; ++f) {
      for (std::size_t e = 0; e < frame; ++e) {
        z.shared_max_diff = std::max(z.shared_max_diff, std::abs(a[f * frame + e] - b[f * k * frame + e]));
      }
    }
  }
  return z;
}

template <typename T>
std::vector<TimingRecord> bench_rollout(const ParameterStore<T>& store, const FieldInput<T>& in,
                                        const BenchOptions& opts) {
  if (opts.steps.empty() || opts.modes.empty() || opts.runs == 0) {
    throw Error(ErrorCode::kInvalidArgument, "bench: empty steps, modes or runs");
  }
  auto make_times = [&](std::size_t n) {
    std::vector<double> t(n);
    for (std::size_t k = 0; k < n; ++k) t[k] = opts.dt * static_cast<double>(k + 1);
    return t;
  };

  // Correctness gate before any timing.
  const auto gate_times = make_times(*std::max_element(opts.steps.begin(), opts.steps.end()));
  const auto par = forward(store, in, gate_times, RolloutMode::kParallel);
  const auto seq = forward(store, in, gate_times, RolloutMode::kSequential);
  double diff = 0.0;
  for (std::size_t i = 0; i < par.size(); ++i) diff = std::max(diff, std::abs(double(par[i]) - double(seq[i])));
  if (par.size() != seq.size() || !(diff < opts.tolerance)) {
    std::ostringstream os;
    os << "parallel and sequential rollouts differ by " << diff << " (tolerance " << opts.tolerance << ")";
    throw Error(ErrorCode::kMismatch, os.str());
  }

  std::vector<TimingRecord> rows;
  for (RolloutMode mode : opts.modes) {
    for (std::size_t n : opts.steps) {
      const auto times = make_times(n);
      for (std::size_t w = 0; w < opts.warmups; ++w) (void)forward(store, in, times, mode);
      std::vector<double> walls;
      std::size_t peak = 0;
      for (std::size_t run = 0; run < opts.runs; ++run) {
        memory::reset_peak();
        const std::size_t base = memory::stats().current_bytes;
        const auto t0 = std::chrono::steady_clock::now();
        const auto out = forward(store, in, times, mode);
        walls.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
        const std::size_t high = memory::stats().peak_bytes - base, own = out.size() * sizeof(T);
        peak = std::max(peak, high > own ? high - own : 0);
      }
      std::sort(walls.begin(), walls.end());
      const std::size_t m = walls.size();
      const double median = m % 2 ? walls[m / 2] : 0.5 * (walls[m / 2 - 1] + walls[m / 2]);
      rows.push_back({mode_name(mode), n, median, peak});
    }
  }
  return rows;
}

nlohmann::json report_to_json(const EvalReport& r) {
  auto agg = [](const MeanStd& m) { return nlohmann::json{{"mean", m.mean}, {"std", m.std}}; };
  nlohmann::json j;
  j["label"] = r.label;
  j["nrmse"] = agg(r.nrmse_agg);
  j["brmse"] = agg(r.brmse_agg);
  j["persistence_nrmse"] = agg(r.baseline_agg);
  j["per_sample"] = {{"nrmse", r.nrmse}, {"brmse", r.brmse}, {"persistence_nrmse", r.baseline_nrmse}};
  j["skipped_slices"] = r.skipped_slices;
  j["temporal"] = {{"t", r.times}, {"mean", r.temporal_mean}, {"std", r.temporal_std}};
  nlohmann::json timing = nlohmann::json::array();
  for (const auto& t : r.timing) {
    timing.push_back({{"mode", t.mode}, {"n_steps", t.n_steps}, {"wall_ms", t.wall_ms}, {"peak_bytes", t.peak_bytes}});
  }
  j["timing"] = timing;
  return j;
}

void write_temporal_csv(const std::filesystem::path& path, const EvalReport& r) {
  auto out = open_csv(path);
  out << "t,mean,std\n";
  for (std::size_t k = 0; k < r.times.size(); ++k) {
    out << r.times[k] << ',' << r.temporal_mean.at(k) << ',' << r.temporal_std.at(k) << '\n';
  }
}

void write_heatmap_csv(const std::filesystem::path& path, const Array<double>& heatmap) {
  if (heatmap.rank() != 2) throw Error(ErrorCode::kShape, "heatmap must be [N_t, s]");
  auto out = open_csv(path);
  const std::size_t nt = heatmap.dim(0), s = heatmap.dim(1);
  for (std::size_t k = 0; k < nt; ++k) {
    for (std::size_t i = 0; i < s; ++i) out << (i ? "," : "") << heatmap[k * s + i];
    out << '\n';
  }
}

void write_bench_csv(const std::filesystem::path& path, const std::vector<TimingRecord>& rows) {
  auto out = open_csv(path);
  out << "mode,n_steps,wall_ms_median,peak_bytes\n";
  for (const auto& r : rows) out << r.mode << ',' << r.n_steps << ',' << r.wall_ms << ',' << r.peak_bytes << '\n';
}

#define VCNEF_INSTANTIATE(T)                                                                                      \
  template EvalReport evaluate<T>(const ParameterStore<T>&, const Dataset&, const EvalOptions&, Dataset*);       \
  template SpatialZssr eval_spatial_zssr<T>(const ParameterStore<T>&, const Dataset&, std::size_t,               \
                                            const EvalOptions&);                                                  \
  template TemporalZssr eval_temporal_zssr<T>(const ParameterStore<T>&, const Dataset&, std::size_t,             \
                                              const EvalOptions&);                                                \
  template std::vector<TimingRecord> bench_rollout<T>(const ParameterStore<T>&, const FieldInput<T>&,             \
                                                      const BenchOptions&);

VCNEF_INSTANTIATE(float)
VCNEF_INSTANTIATE(double)
#undef VCNEF_INSTANTIATE

}  // namespace vcnef
