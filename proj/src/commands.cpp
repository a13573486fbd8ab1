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

#include "vcnef/commands.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "vcnef/checkpoint.hpp"
#include "vcnef/error.hpp"
#include "vcnef/evaluation.hpp"
#include "vcnef/training.hpp"

namespace vcnef {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void prepare(const fs::path& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + out.string() + ": " + ec.message());
}

void require_finite(double v, const std::string& what) {
  if (!std::isfinite(v)) throw Error(ErrorCode::kNonFinite, what + " is not finite");
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

// Largest drift of the spatial integral from its initial value, over samples.
double mass_drift(const Dataset& d) {
  double worst = 0.0;
  const double dx = d.meta.dx();
  for (const auto& tr : d.samples) {
    double m0 = 0.0;
    for (std::size_t k = 0; k < tr.nt(); ++k) {
      double m = 0.0;
      for (std::size_t i = 0; i < tr.s() * tr.c(); ++i) m += tr.values[k * tr.s() * tr.c() + i];
      m *= dx;
      if (k == 0) m0 = m;
      worst = std::max(worst, std::abs(m - m0));
    }
  }
  return worst;
}

std::string checkpoint_dtype(const fs::path& path) {
  const auto ck = read_checkpoint<float>(path);
  return ck.meta.value("dtype", std::string("f32"));
}

// The dataset regenerated at another resolution from the run config and the
// seed recorded in `d`; checked against `d` on the shared points.
Dataset regenerate(const RunConfig& cfg, const Dataset& d, std::size_t s, std::size_t nt) {
  DataConfig dc = cfg.data;
  dc.n_samples = d.size();
  dc.s = s;
  dc.nt = nt;
  Dataset fine = generate_dataset(dc, d.meta.seed);
  const Dataset back = subsample(fine, s / d.meta.s, (nt - 1) / (d.meta.nt - 1));
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto& a = back.samples[i].values;
    const auto& b = d.samples[i].values;
    if (a.shape() != b.shape()) throw Error(ErrorCode::kMetadata, "regenerated data does not match the dataset grid");
    for (std::size_t k = 0; k < a.size(); ++k) {
      if (std::abs(a[k] - b[k]) > 1e-6) {
        throw Error(ErrorCode::kMetadata, "the config's data section does not reproduce the dataset");
      }
    }
  }
  return fine;
}

// Drops log rows past `step`, left behind when a run died between writing
// the log and the checkpoint.
void truncate_log(const fs::path& csv, std::uint64_t step) {
  std::ifstream in(csv);
  if (!in) return;
  std::string line, kept;
  std::getline(in, line);
  kept = line + '\n';
  while (std::getline(in, line)) {
    const auto a = line.find(','), b = line.find(',', a + 1);
    if (a == std::string::npos || b == std::string::npos) continue;
    if (std::stoull(line.substr(a + 1, b - a - 1)) <= step) kept += line + '\n';
  }
  in.close();
  std::ofstream out(csv, std::ios::trunc);
  out << kept;
}

template <typename T>
void train_impl(const RunConfig& cfg, const Dataset& d, const fs::path& out, bool resume, std::size_t stop_epoch,
                const LogFn& log) {
  const fs::path ckpt = out / files::kCheckpoint, csv = out / files::kTrainLog;
  const std::string hash = config_hash(cfg);
  TrainState<T> state;
  if (resume && fs::exists(ckpt)) {
    json meta;
    state = load_train_state<T>(ckpt, &meta);
    if (meta.value("config_hash", std::string{}) != hash) {
      throw Error(ErrorCode::kMetadata, "cannot resume: checkpoint was produced by config " +
                                            meta.value("config_hash", std::string("?")) + ", current is " + hash);
    }
    truncate_log(csv, state.step);
    log("resuming at epoch " + std::to_string(state.epoch) + ", step " + std::to_string(state.step));
  } else {
    state = make_train_state(init_parameters<T>(cfg.model), cfg.train.seed);
    fs::remove(csv);
  }
  const json extra{{"config_hash", hash}, {"dataset_config_hash", d.meta.config_hash},
                   {"config", run_config_to_json(cfg)}};
  TrainLog tlog;
  std::size_t written = 0;
  train<T>(state, cfg.train, d, &tlog, [&](const TrainState<T>& st, double loss) {
    require_finite(loss, "epoch loss");
    append_train_csv(csv, {tlog.steps.begin() + static_cast<std::ptrdiff_t>(written), tlog.steps.end()});
    written = tlog.steps.size();
    save_train_state(ckpt, st, extra);
    if (cfg.train.randomized_starts && !tlog.schedules.empty()) {
      std::string starts;
      for (std::size_t s : tlog.schedules.back()) starts += (starts.empty() ? "" : ",") + std::to_string(s);
      log("starts " + starts);
    }
    log("epoch " + std::to_string(st.epoch) + "/" + std::to_string(cfg.train.epochs) + " loss " + fmt(loss));
  }, stop_epoch ? stop_epoch : static_cast<std::size_t>(-1));
  if (state.epoch == 0 || !fs::exists(ckpt)) save_train_state(ckpt, state, extra);
}

template <typename T>
void eval_impl(const RunConfig& cfg, const ParameterStore<T>& store, const json& ck_meta, const Dataset& d,
               const fs::path& out, const LogFn& log) {
  check_compatible(store.config, d);
  EvalOptions opts;
  opts.start = cfg.eval.start;
  opts.mode = parse_mode(cfg.eval.mode);
  opts.absolute_times = cfg.eval.absolute_times;

  Dataset pred;
  EvalReport r = evaluate(store, d, opts, &pred);
  r.label = "s=" + std::to_string(d.meta.s);
  require_finite(r.nrmse_agg.mean, "nRMSE");
  require_finite(r.brmse_agg.mean, "bRMSE");
  if (r.skipped_slices) log("warning: " + std::to_string(r.skipped_slices) + " zero-norm slices left out of nRMSE");
  log("nRMSE " + fmt(r.nrmse_agg.mean) + " +- " + fmt(r.nrmse_agg.std) + ", bRMSE " + fmt(r.brmse_agg.mean) +
      ", persistence nRMSE " + fmt(r.baseline_agg.mean));

  json report;
  report["config_hash"] = config_hash(cfg);
  report["checkpoint_config_hash"] = ck_meta.value("config_hash", std::string{});
  report["dataset_config_hash"] = d.meta.config_hash;
  report["eval"] = report_to_json(r);

  if (cfg.eval.spatial_zssr > 1) {
    const Dataset fine = regenerate(cfg, d, d.meta.s * cfg.eval.spatial_zssr, d.meta.nt);
    const auto z = eval_spatial_zssr(store, fine, d.meta.s, opts);
    require_finite(z.ratio, "spatial super-resolution ratio");
    report["spatial_zssr"] = {{"train_res", report_to_json(z.train_res)}, {"fine", report_to_json(z.fine)},
                              {"ratio", z.ratio}};
    log("spatial x" + std::to_string(cfg.eval.spatial_zssr) + ": nRMSE " + fmt(z.train_res.nrmse_agg.mean) + " -> " +
        fmt(z.fine.nrmse_agg.mean) + " (ratio " + fmt(z.ratio) + ")");
  }
  if (cfg.eval.temporal_zssr > 1) {
    const Dataset dense = regenerate(cfg, d, d.meta.s, (d.meta.nt - 1) * cfg.eval.temporal_zssr + 1);
    const auto z = eval_temporal_zssr(store, dense, d.meta.nt, opts);
    require_finite(z.ratio, "temporal super-resolution ratio");
    report["temporal_zssr"] = {{"coarse", report_to_json(z.coarse)}, {"dense", report_to_json(z.dense)},
                               {"ratio", z.ratio}, {"shared_max_diff", z.shared_max_diff}};
    log("temporal x" + std::to_string(cfg.eval.temporal_zssr) + ": nRMSE " + fmt(z.coarse.nrmse_agg.mean) + " -> " +
        fmt(z.dense.nrmse_agg.mean) + " (ratio " + fmt(z.ratio) + ", shared diff " + fmt(z.shared_max_diff) + ")");
  }
  write_json(out / files::kReport, report);
  write_temporal_csv(out / files::kTemporal, r);
  write_heatmap_csv(out / files::kHeatmap, r.heatmap);
  pred.meta.config_hash = config_hash(cfg);
  write_dataset(pred, out / files::kPredictions);
}

template <typename T>
void bench_impl(const RunConfig& cfg, const ParameterStore<T>& store, const Dataset& d, const fs::path& out,
                const LogFn& log) {
  check_compatible(store.config, d);
  BenchOptions opts;
  opts.steps = cfg.eval.bench_steps;
  opts.dt = cfg.eval.bench_dt;
  opts.warmups = cfg.eval.bench_warmups;
  opts.runs = cfg.eval.bench_runs;
  if (cfg.eval.bench_mode != "both") opts.modes = {parse_mode(cfg.eval.bench_mode)};
  const auto rows = bench_rollout(store, field_input<T>(d, 0, 0), opts);
  for (const auto& r : rows) {
    log(r.mode + " n_steps=" + std::to_string(r.n_steps) + " wall_ms=" + fmt(r.wall_ms) +
        " peak_bytes=" + std::to_string(r.peak_bytes));
  }
  write_bench_csv(out / files::kBench, rows);
}

}  // namespace

void cmd_generate(const RunConfig& cfg, const fs::path& out, const LogFn& log) {
  prepare(out);
  Dataset d = generate_dataset(cfg.data, cfg.data_seed());
  d.meta.config_hash = config_hash(cfg);
  write_dataset(d, out / files::kDataset);
  write_json(out / files::kConfig, run_config_to_json(cfg));
  std::string line = "generated " + d.meta.pde + ": N=" + std::to_string(d.size()) + " N_t=" +
                     std::to_string(d.meta.nt) + " s=" + std::to_string(d.meta.s) + " c=" + std::to_string(d.meta.c);
  if (d.meta.pde == "burgers") line += " max mass drift " + fmt(mass_drift(d));
  log(line);
}

void cmd_train(const RunConfig& cfg, const fs::path& data, const fs::path& out, bool resume, const LogFn& log,
               std::size_t stop_epoch) {
  prepare(out);
  const Dataset d = read_dataset(data);
  check_compatible(cfg.model, d);
  write_json(out / files::kConfig, run_config_to_json(cfg));
  if (cfg.train.precision == "f64") {
    train_impl<double>(cfg, d, out, resume, stop_epoch, log);
  } else {
    train_impl<float>(cfg, d, out, resume, stop_epoch, log);
  }
}

void cmd_eval(const RunConfig& cfg, const fs::path& checkpoint, const fs::path& data, const fs::path& out,
              const LogFn& log) {
  prepare(out);
  const Dataset d = read_dataset(data);
  json meta;
  if (checkpoint_dtype(checkpoint) == "f64") {
    eval_impl(cfg, load_model<double>(checkpoint, &meta), meta, d, out, log);
  } else {
    eval_impl(cfg, load_model<float>(checkpoint, &meta), meta, d, out, log);
  }
}

void cmd_bench(const RunConfig& cfg, const fs::path& checkpoint, const fs::path& data, const fs::path& out,
               const LogFn& log) {
  prepare(out);
  Dataset d;
  if (data.empty()) {
    DataConfig dc = cfg.data;
    dc.n_samples = 1;
    d = generate_dataset(dc, cfg.data_seed());
  } else {
    d = read_dataset(data);
  }
  if (checkpoint_dtype(checkpoint) == "f64") {
    bench_impl(cfg, load_model<double>(checkpoint), d, out, log);
  } else {
    bench_impl(cfg, load_model<float>(checkpoint), d, out, log);
  }
}

}  // namespace vcnef
