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

#include "vcnef/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "vcnef/checkpoint.hpp"
#include "vcnef/error.hpp"
#include "vcnef/json_util.hpp"
#include "vcnef/parallel.hpp"
#include "vcnef/rng.hpp"

namespace vcnef {

namespace {

using nlohmann::json;

double cosine(double from, double to, double frac) {
  return to + (from - to) * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
}

std::string rng_to_string(const std::mt19937_64& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

std::mt19937_64 rng_from_string(const std::string& s) {
  std::mt19937_64 rng;
  std::istringstream is(s);
  is >> rng;
  if (!is) throw Error(ErrorCode::kMetadata, "corrupt RNG state in checkpoint");
  return rng;
}

std::size_t usable_starts(const std::vector<std::size_t>& schedule, std::size_t nt) {
  return static_cast<std::size_t>(std::count_if(schedule.begin(), schedule.end(), [&](std::size_t s) { return s + 1 < nt; }));
}

}  // namespace

void TrainConfig::validate() const {
  auto bad = [](const std::string& what) { throw Error(ErrorCode::kConfig, "train config: " + what); };
  if (batch_size == 0) bad("batch_size must be positive");
  if (!(max_lr >= 0.0)) bad("max_lr must be >= 0");
  if (!(schedule.pct_peak > 0.0 && schedule.pct_peak < 1.0)) bad("pct_peak must lie in (0, 1)");
  if (!(schedule.start_div > 0.0 && schedule.final_div > 0.0)) bad("divisors must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) bad("betas must lie in [0, 1)");
  if (!(adam_eps > 0.0)) bad("adam_eps must be positive");
  if (precision != "f32" && precision != "f64") bad("precision must be f32 or f64");
  if (clip && !(clip_norm > 0.0)) bad("clip_norm must be positive");
}

double one_cycle_lr(std::size_t step, std::size_t total, double max_lr, const OneCycle& cfg) {
  if (total == 0) return max_lr * cfg.start_div;
  step = std::min(step, total);
  const double peak = cfg.pct_peak * static_cast<double>(total);
  const double s = static_cast<double>(step);
  if (s <= peak) return cosine(max_lr * cfg.start_div, max_lr, peak > 0 ? s / peak : 1.0);
  return cosine(max_lr, max_lr * cfg.final_div, (s - peak) / (static_cast<double>(total) - peak));
}

std::vector<std::size_t> starting_point_schedule(std::mt19937_64& rng, std::size_t nt, std::size_t k) {
  if (nt < 2) throw Error(ErrorCode::kInvalidArgument, "starting points need N_t >= 2");
  std::vector<std::size_t> rest(nt - 1);
  std::iota(rest.begin(), rest.end(), 1);
  // Fisher-Yates with the portable integer draw.
  for (std::size_t i = rest.size(); i > 1; --i) {
    std::swap(rest[i - 1], rest[uniform_int(rng, 0, i - 1)]);
  }
  rest.resize(std::min(k, rest.size()));
  rest.insert(rest.begin(), 0);
  return rest;
}

template <typename T>
double mse_loss(const Array<T>& pred, const Array<T>& target) {
  if (pred.shape() != target.shape()) {
    throw Error(ErrorCode::kShape, "mse_loss: " + shape_string(pred.shape()) + " vs " +
                                       shape_string(target.shape()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double e = static_cast<double>(pred[i]) - static_cast<double>(target[i]);
    acc += e * e;
  }
  return acc / static_cast<double>(pred.size());
}

template <typename T>
Var<T> mse_loss(const Var<T>& pred, const Var<T>& target) {
  if (pred.shape() != target.shape()) {
    throw Error(ErrorCode::kShape, "mse_loss: " + shape_string(pred.shape()) + " vs " +
                                       shape_string(target.shape()));
  }
  return ops::mean(ops::square(ops::sub(pred, target)));
}

template <typename T>
FieldInput<T> field_input(const Dataset& d, std::size_t i, std::size_t frame) {
  const auto& tr = d.samples.at(i);
  FieldInput<T> in;
  in.u0 = tr.frame(frame).template cast<T>();
  Array<T> x(tr.grid.shape());
  auto o = x.mutable_data();
  for (std::size_t k = 0; k < tr.grid.size(); ++k) o[k] = static_cast<T>(d.meta.domain.to_unit(tr.grid[k]));
  in.x = std::move(x);
  in.p = Array<double>({tr.params.size()}, std::span<const double>(tr.params)).template cast<T>();
  in.extents = d.meta.extents.empty() ? std::vector<std::size_t>{tr.s()} : d.meta.extents;
  return in;
}

template <typename T>
Array<T> target_frames(const Trajectory& tr, std::size_t start) {
  if (start + 1 >= tr.nt()) throw Error(ErrorCode::kInvalidArgument, "start frame leaves no targets");
  const std::size_t frame = tr.s() * tr.c(), n = tr.nt() - 1 - start;
  Array<T> out({n, tr.s(), tr.c()});
  auto o = out.mutable_data();
  auto src = tr.values.data();
  for (std::size_t k = 0; k < n * frame; ++k) o[k] = static_cast<T>(src[(start + 1) * frame + k]);
  return out;
}

std::vector<double> query_times(const std::vector<double>& times, std::size_t start, bool absolute) {
  std::vector<double> q;
  for (std::size_t k = start + 1; k < times.size(); ++k) q.push_back(absolute ? times[k] : times[k] - times[start]);
  return q;
}

template <typename T>
TrainState<T> make_train_state(ParameterStore<T> store, std::uint64_t seed) {
  TrainState<T> st;
  for (const auto& [k, v] : store.params) {
    if (!store.trainable(k)) continue;
    st.m.emplace(k, Array<T>(v.shape()));
    st.v.emplace(k, Array<T>(v.shape()));
  }
  st.store = std::move(store);
  st.seed = seed;
  st.rng.seed(derive_seed(seed, std::string_view("shuffle")));
  return st;
}

std::vector<std::size_t> epoch_schedule(const TrainConfig& cfg, std::uint64_t seed, std::uint64_t epoch,
                                        std::size_t nt) {
  if (!cfg.randomized_starts) return {0};
  std::mt19937_64 rng(derive_seed(derive_seed(seed, std::string_view("starts")), epoch));
  return starting_point_schedule(rng, nt, cfg.starts_per_epoch);
}

std::size_t total_steps(const TrainConfig& cfg, std::uint64_t seed, std::size_t n_samples, std::size_t nt) {
  const std::size_t batches = (n_samples + cfg.batch_size - 1) / cfg.batch_size;
  std::size_t starts = 0;
  for (std::size_t e = 0; e < cfg.epochs; ++e) starts += usable_starts(epoch_schedule(cfg, seed, e, nt), nt);
  return starts * batches;
}

template <typename T>
StepRecord train_step(TrainState<T>& state, const TrainConfig& cfg, const Dataset& d,
                      const std::vector<std::size_t>& samples, std::size_t start, double lr,
                      TrainLog* log) {
  const auto t0 = std::chrono::steady_clock::now();
  if (samples.empty()) throw Error(ErrorCode::kInvalidArgument, "train_step: empty batch");
  if (start + 1 >= d.meta.nt) throw Error(ErrorCode::kInvalidArgument, "train_step: start must be < N_t - 1");
  const auto& model_cfg = state.store.config;
  const auto times = query_times(d.meta.times, start, cfg.absolute_times);

  std::vector<double> losses(samples.size());
  std::vector<ParamMap<T>> grads(samples.size());
  auto fail = [&](const std::string& what, double loss, double grad_norm) {
    std::ostringstream os;
    os << "non-finite training state at step " << state.step << " (lr=" << lr << ", loss=" << loss
       << ", grad_norm=" << grad_norm << "): " << what;
    throw Error(ErrorCode::kNonFinite, os.str());
  };
  try {
    parallel_for(samples.size(), [&](std::size_t b) {
      const std::size_t i = samples[b];
      Graph<T> g;
      const ParamView<T> pv(state.store, g);
      const auto pred = forward_graph(pv, model_cfg, field_input<T>(d, i, start), times);
      const auto loss = mse_loss(pred, Var<T>(target_frames<T>(d.samples[i], start)));
      losses[b] = static_cast<double>(loss.value().item());
      grads[b] = g.backward(loss);
    });
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kNonFinite) throw;
    fail(e.what(), std::nan(""), std::nan(""));
  }
  if (log && log->record_access) {
    for (std::size_t i : samples) log->access.push_back({state.step, i, start});
  }

  // Fixed-order reduction keeps the update independent of thread timing.
  double loss = 0.0;
  for (double l : losses) loss += l;
  loss /= static_cast<double>(samples.size());
  const double inv = 1.0 / static_cast<double>(samples.size());
  std::map<std::string, std::vector<double>> mean_grad;
  double sq = 0.0;
  for (const auto& [name, m] : state.m) {
    std::vector<double> acc(m.size(), 0.0);
    for (const auto& g : grads) {
      auto src = g.at(name).data();
      for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += static_cast<double>(src[k]);
    }
    for (double& a : acc) {
      a *= inv;
      sq += a * a;
    }
    mean_grad.emplace(name, std::move(acc));
  }
  const double grad_norm = std::sqrt(sq);
  if (!std::isfinite(loss) || !std::isfinite(grad_norm)) fail("loss or gradient", loss, grad_norm);
  const double scale = cfg.clip && grad_norm > cfg.clip_norm ? cfg.clip_norm / grad_norm : 1.0;

  const double t = static_cast<double>(state.step + 1);
  const double c1 = 1.0 - std::pow(cfg.beta1, t), c2 = 1.0 - std::pow(cfg.beta2, t);
  for (auto& [name, m] : state.m) {
    const auto& g = mean_grad.at(name);
    auto mm = m.mutable_data();
    auto vv = state.v.at(name).mutable_data();
    auto p = state.store.params.at(name).mutable_data();
    for (std::size_t k = 0; k < g.size(); ++k) {
      const double gk = g[k] * scale;
      const double m1 = cfg.beta1 * static_cast<double>(mm[k]) + (1.0 - cfg.beta1) * gk;
      const double v1 = cfg.beta2 * static_cast<double>(vv[k]) + (1.0 - cfg.beta2) * gk * gk;
      mm[k] = static_cast<T>(m1);
      vv[k] = static_cast<T>(v1);
      const double update = lr * (m1 / c1) / (std::sqrt(v1 / c2) + cfg.adam_eps);
      p[k] = static_cast<T>(static_cast<double>(p[k]) - update);
    }
  }
  ++state.step;
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  StepRecord rec{state.epoch, state.step, lr, loss, grad_norm, ms};
  if (log) log->steps.push_back(rec);
  return rec;
}

template <typename T>
void train(TrainState<T>& state, const TrainConfig& cfg, const Dataset& d, TrainLog* log,
           const std::function<void(const TrainState<T>&, double)>& on_epoch, std::size_t stop_epoch) {
  cfg.validate();
  if (d.size() == 0) throw Error(ErrorCode::kInvalidArgument, "train: empty dataset");
  const std::size_t total = total_steps(cfg, state.seed, d.size(), d.meta.nt);
  std::vector<std::size_t> order(d.size());
  while (state.epoch < std::min<std::uint64_t>(cfg.epochs, stop_epoch)) {
    const auto schedule = epoch_schedule(cfg, state.seed, state.epoch, d.meta.nt);
    if (log) log->schedules.push_back(schedule);
    double sum = 0.0;
    std::size_t steps = 0;
    for (std::size_t start : schedule) {
      if (start + 1 >= d.meta.nt) continue;
      std::iota(order.begin(), order.end(), 0);
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_int(state.rng, 0, i - 1)]);
      for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
        const std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(b),
                                             order.begin() + static_cast<std::ptrdiff_t>(std::min(b + cfg.batch_size, order.size())));
        const double lr = one_cycle_lr(state.step, total, cfg.max_lr, cfg.schedule);
        sum += train_step(state, cfg, d, batch, start, lr, log).loss;
        ++steps;
      }
    }
    ++state.epoch;
    if (on_epoch) on_epoch(state, sum / static_cast<double>(steps));
  }
}

void append_train_csv(const std::filesystem::path& path, const std::vector<StepRecord>& rows) {
  const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  std::ofstream out(path, std::ios::app);
  if (!out) throw Error(ErrorCode::kIo, "cannot open training log " + path.string());
  out.precision(17);
  if (fresh) out << "epoch,step,lr,loss,grad_norm,wall_ms\n";
  for (const auto& r : rows) {
    out << r.epoch << ',' << r.step << ',' << r.lr << ',' << r.loss << ',' << r.grad_norm << ',' << r.wall_ms << '\n';
  }
}

json train_config_to_json(const TrainConfig& c) {
  return json{{"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"max_lr", c.max_lr},
              {"pct_peak", c.schedule.pct_peak},
              {"start_div", c.schedule.start_div},
              {"final_div", c.schedule.final_div},
              {"beta1", c.beta1},
              {"beta2", c.beta2},
              {"adam_eps", c.adam_eps},
              {"seed", c.seed},
              {"randomized_starts", c.randomized_starts},
              {"starts_per_epoch", c.starts_per_epoch},
              {"absolute_times", c.absolute_times},
              {"clip", c.clip},
              {"clip_norm", c.clip_norm},
              {"precision", c.precision}};
}

TrainConfig train_config_from_json(const json& j) {
  const std::string w = "train";
  require_known_keys(j,
                     {"epochs", "batch_size", "max_lr", "pct_peak", "start_div", "final_div", "beta1",
                      "beta2", "adam_eps", "seed", "randomized_starts", "starts_per_epoch",
                      "absolute_times", "clip", "clip_norm", "precision"},
                     w);
  TrainConfig c;
  read_opt(j, "epochs", c.epochs, w);
  read_opt(j, "batch_size", c.batch_size, w);
  read_opt(j, "max_lr", c.max_lr, w);
  read_opt(j, "pct_peak", c.schedule.pct_peak, w);
  read_opt(j, "start_div", c.schedule.start_div, w);
  read_opt(j, "final_div", c.schedule.final_div, w);
  read_opt(j, "beta1", c.beta1, w);
  read_opt(j, "beta2", c.beta2, w);
  read_opt(j, "adam_eps", c.adam_eps, w);
  read_opt(j, "seed", c.seed, w);
  read_opt(j, "randomized_starts", c.randomized_starts, w);
  read_opt(j, "starts_per_epoch", c.starts_per_epoch, w);
  read_opt(j, "absolute_times", c.absolute_times, w);
  read_opt(j, "clip", c.clip, w);
  read_opt(j, "clip_norm", c.clip_norm, w);
  read_opt(j, "precision", c.precision, w);
  c.validate();
  return c;
}

template <typename T>
void save_train_state(const std::filesystem::path& path, const TrainState<T>& st, const json& extra) {
  json meta = extra;
  meta["model"] = model_config_to_json(st.store.config);
  meta["t_norm"] = st.store.config.t_norm;
  meta["frozen"] = st.store.frozen;
  meta["step"] = st.step;
  meta["epoch"] = st.epoch;
  meta["seed"] = st.seed;
  meta["rng"] = rng_to_string(st.rng);
  ParamMap<T> arrays;
  for (const auto& [k, v] : st.store.params) arrays.emplace("param/" + k, v);
  for (const auto& [k, v] : st.m) arrays.emplace("adam_m/" + k, v);
  for (const auto& [k, v] : st.v) arrays.emplace("adam_v/" + k, v);
  write_checkpoint(path, std::move(meta), arrays);
}

template <typename T>
TrainState<T> load_train_state(const std::filesystem::path& path, json* meta) {
  auto ck = read_checkpoint<T>(path);
  TrainState<T> st;
  st.store = store_from_checkpoint(ck);
  try {
    st.step = ck.meta.at("step").template get<std::uint64_t>();
    st.epoch = ck.meta.at("epoch").template get<std::uint64_t>();
    st.seed = ck.meta.at("seed").template get<std::uint64_t>();
    st.rng = rng_from_string(ck.meta.at("rng").template get<std::string>());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMetadata, std::string("checkpoint lacks training state: ") + e.what());
  }
  for (const auto& [k, v] : st.store.params) {
    if (!st.store.trainable(k)) continue;
    auto m = ck.arrays.find("adam_m/" + k), vv = ck.arrays.find("adam_v/" + k);
    if (m == ck.arrays.end() || vv == ck.arrays.end()) {
      throw Error(ErrorCode::kMetadata, "checkpoint lacks optimizer moments for '" + k + "'");
    }
    st.m.emplace(k, m->second);
    st.v.emplace(k, vv->second);
  }
  if (meta) *meta = std::move(ck.meta);
  return st;
}

#define VCNEF_INSTANTIATE_TRAINING(T)                                                                \
  template double mse_loss<T>(const Array<T>&, const Array<T>&);                                     \
  template Var<T> mse_loss<T>(const Var<T>&, const Var<T>&);                                         \
  template FieldInput<T> field_input<T>(const Dataset&, std::size_t, std::size_t);                   \
  template Array<T> target_frames<T>(const Trajectory&, std::size_t);                                \
  template TrainState<T> make_train_state<T>(ParameterStore<T>, std::uint64_t);                      \
  template StepRecord train_step<T>(TrainState<T>&, const TrainConfig&, const Dataset&,              \
                                    const std::vector<std::size_t>&, std::size_t, double, TrainLog*); \
  template void train<T>(TrainState<T>&, const TrainConfig&, const Dataset&, TrainLog*,              \
                         const std::function<void(const TrainState<T>&, double)>&, std::size_t);     \
  template void save_train_state<T>(const std::filesystem::path&, const TrainState<T>&, const json&); \
  template TrainState<T> load_train_state<T>(const std::filesystem::path&, json*);

VCNEF_INSTANTIATE_TRAINING(float)
VCNEF_INSTANTIATE_TRAINING(double)

}  // namespace vcnef
