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

// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 when any
// criterion fails. `--only 1,4,9` runs a subset; `--epochs N` shortens the
// two learning runs for local experiments (the registered test uses the
// defaults).

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <unsupported/Eigen/SpecialFunctions>
#include <vector>

#include "burgers_oracle.hpp"
#include "metric_oracles.hpp"
#include "model_checks.hpp"
#include "test_util.hpp"
#include "vcnef/checkpoint.hpp"
#include "vcnef/evaluation.hpp"
#include "vcnef/parallel.hpp"
#include "vcnef/pde_data.hpp"
#include "vcnef/training.hpp"

using namespace vcnef;
using namespace vcnef::testing;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

template <typename F>
double median_ms(int runs, F&& f) {
  std::vector<double> t;
  for (int r = 0; r < runs; ++r) {
    const auto t0 = Clock::now();
    f();
    t.push_back(std::chrono::duration<double, std::milli>(Clock::now() - t0).count());
  }
  std::sort(t.begin(), t.end());
  return t[t.size() / 2];
}

DataConfig advection_config(std::size_t n, std::size_t s, std::size_t nt, std::vector<double> betas) {
  DataConfig dc;
  dc.pde = "advection";
  dc.n_samples = n;
  dc.s = s;
  dc.nt = nt;
  dc.params = std::move(betas);
  return dc;
}

// Seeds of the learning datasets; train and test never share ICs.
constexpr std::uint64_t kTrainSeed = 101, kTestSeed = 202, kInitSeed = 7, kShuffleSeed = 11;

struct Learned {
  ParameterStore<float> store;
  Dataset train, test;
  double minutes = 0.0;
};

Learned learn(const std::vector<double>& train_betas, const std::vector<double>& test_betas, std::size_t epochs) {
  Learned r;
  const auto t0 = Clock::now();
  r.train = generate_dataset(advection_config(512, 64, 21, train_betas), kTrainSeed);
  r.test = generate_dataset(advection_config(64, 64, 21, test_betas), kTestSeed);
  ModelConfig mc = default_desk_config();
  mc.seed = kInitSeed;
  mc.t_norm = 2.0;
  TrainConfig tc;
  tc.epochs = epochs;
  tc.batch_size = 16;
  tc.max_lr = 3e-3;
  tc.seed = kShuffleSeed;
  auto st = make_train_state(init_parameters<float>(mc), tc.seed);
  train<float>(st, tc, r.train, nullptr, [&](const TrainState<float>& s, double loss) {
    if (s.epoch % 10 == 0 || s.epoch == epochs) {
      std::printf("    epoch %zu/%zu loss %.5g (%.1f min)\n", static_cast<std::size_t>(s.epoch), epochs, loss,
                  seconds_since(t0) / 60.0);
      std::fflush(stdout);
    }
  });
  r.store = std::move(st.store);
  r.minutes = seconds_since(t0) / 60.0;
  return r;
}

double mean_predictor_nrmse(const Dataset& train, const Dataset& test) {
  const auto m = mean_predictor(train, 0);
  double acc = 0.0;
  for (const auto& tr : test.samples) acc += nrmse(target_frames<double>(tr, 0), m);
  return acc / static_cast<double>(test.size());
}

// ---------------------------------------------------------------------------

Outcome attention_equivalence() {
  double worst = 0.0;
  for (std::size_t n : {1u, 8u, 64u}) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      std::mt19937_64 rng(seed);
      const auto q = random_array({n, 8}, rng), k = random_array({n, 8}, rng), v = random_array({n, 8}, rng);
      const auto fast = model::linear_attention<double>(q, k, v, 0.0).value();
      worst = std::max(worst, max_abs_diff(fast, quadratic_attention(q, k, v)));
    }
  }
  return {worst < 1e-10, "max |right - left| = " + fmt(worst) + " (< 1e-10)"};
}

Outcome attention_scaling() {
  std::mt19937_64 rng(5);
  auto make = [&](std::size_t n) {
    return std::array<Array<double>, 3>{random_array({n, 16}, rng), random_array({n, 16}, rng),
                                        random_array({n, 16}, rng)};
  };
  const auto small = make(1024), large = make(4096);
  // Linear attention is fast enough that each sample repeats it.
  auto lin = [](const std::array<Array<double>, 3>& a) {
    for (int r = 0; r < 20; ++r) (void)model::linear_attention<double>(a[0], a[1], a[2], 0.0);
  };
  auto quad = [](const std::array<Array<double>, 3>& a) { (void)quadratic_attention(a[0], a[1], a[2]); };
  lin(small);
  const double l1 = median_ms(7, [&] { lin(small); }), l4 = median_ms(7, [&] { lin(large); });
  const double q1 = median_ms(5, [&] { quad(small); }), q4 = median_ms(5, [&] { quad(large); });
  const double lr = l4 / l1, qr = q4 / q1;
  return {lr <= 6.0 && qr >= 12.0,
          "linear t(4096)/t(1024) = " + fmt(lr) + " (<= 6), quadratic = " + fmt(qr) + " (>= 12)"};
}

Outcome gradient_check() {
  const auto r = tiny_gradient_check(1);
  return {r.worst < 1e-4, "worst relative error " + fmt(r.worst) + " at '" + r.worst_name + "' over " +
                              std::to_string(r.parameters) + " parameter arrays (< 1e-4)"};
}

Outcome rollout_equality() {
  double worst = 0.0;
  std::vector<double> times;
  for (int k = 1; k <= 40; ++k) times.push_back(0.05 * k);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(1000 + seed);
    ModelConfig mc = default_desk_config();
    mc.seed = seed;
    const auto store = init_parameters<float>(mc);
    const auto in = random_input_1d<float>(64, 1, rng);
    worst = std::max(worst, max_abs_diff(forward(store, in, times, RolloutMode::kParallel),
                                         forward(store, in, times, RolloutMode::kSequential)));
  }
  std::mt19937_64 rng(77);
  const auto store = init_parameters<float>(default_desk_config());
  BenchOptions opts;
  opts.warmups = 0;
  opts.runs = 1;
  const auto rows = bench_rollout(store, random_input_1d<float>(64, 1, rng), opts);
  std::map<std::string, std::vector<double>> peak;
  for (const auto& r : rows) peak[r.mode].push_back(static_cast<double>(r.peak_bytes));
  const auto& par = peak["parallel"];
  const auto& seq = peak["sequential"];
  bool grows = true;
  for (std::size_t i = 1; i < par.size(); ++i) grows = grows && par[i] > par[i - 1];
  const double flat = std::abs(seq.back() / seq.front() - 1.0);
  return {worst < 1e-6 && grows && flat <= 0.2,
          "max |parallel - sequential| = " + fmt(worst) + " (< 1e-6); sequential peak 40->240 changes " +
              fmt(100 * flat) + "% (<= 20%); parallel peak " + fmt(par.front()) + " -> " + fmt(par.back()) +
              " bytes, monotone: " + (grows ? "yes" : "no")};
}

Outcome permutation_equivariance() {
  std::mt19937_64 rng(21);
  auto cfg = tiny_config();
  cfg.d = 16;
  const auto store = init_parameters<double>(cfg);
  const auto in = random_input_1d<double>(32, 1, rng);
  const std::vector<double> times{0.3, 1.1, 2.0};
  const auto y = forward(store, in, times);
  double worst = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    const auto perm = random_permutation(32, rng);
    auto pin = in;
    pin.u0 = permute_rows(in.u0, perm, 0);
    pin.x = permute_rows(in.x, perm, 0);
    worst = std::max(worst, max_abs_diff(forward(store, pin, times), permute_rows(y, perm, 1)));
  }
  return {worst < 1e-10, "max deviation over 5 permutations " + fmt(worst) + " (< 1e-10)"};
}

Outcome desk_learning(const Learned& m) {
  const auto r = evaluate(m.store, m.test);
  const double mean_pred = mean_predictor_nrmse(m.train, m.test);
  const bool pass = r.nrmse_agg.mean < 0.5 * r.baseline_agg.mean && r.nrmse_agg.mean < mean_pred && m.minutes <= 30.0;
  return {pass, "test nRMSE " + fmt(r.nrmse_agg.mean) + ", persistence " + fmt(r.baseline_agg.mean) + " (bound " +
                    fmt(0.5 * r.baseline_agg.mean) + "), mean predictor " + fmt(mean_pred) + "; trained in " +
                    fmt(m.minutes) + " min on " + std::to_string(worker_threads()) + " thread(s) (<= 30)"};
}

Outcome spatial_zssr(const Learned& m) {
  const auto fine = generate_dataset(advection_config(64, 128, 21, {0.4}), kTestSeed);
  const auto z = eval_spatial_zssr(m.store, fine, 64);
  return {z.ratio <= 1.25, "nRMSE s=64 " + fmt(z.train_res.nrmse_agg.mean) + ", s=128 " + fmt(z.fine.nrmse_agg.mean) +
                               ", ratio " + fmt(z.ratio) + " (<= 1.25)"};
}

Outcome temporal_zssr(const Learned& m) {
  const auto dense = generate_dataset(advection_config(64, 64, 41, {0.4}), kTestSeed);
  const auto z = eval_temporal_zssr(m.store, dense, 21);
  return {z.shared_max_diff < 1e-6 && z.ratio <= 1.10,
          "shared-time diff " + fmt(z.shared_max_diff) + " (< 1e-6); nRMSE 21 times " + fmt(z.coarse.nrmse_agg.mean) +
              ", 41 times " + fmt(z.dense.nrmse_agg.mean) + ", ratio " + fmt(z.ratio) + " (<= 1.10)"};
}

Outcome metric_oracles() {
  std::mt19937_64 rng(9);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Shape shape{1 + rng() % 8, 2 + rng() % 32, 1 + rng() % 3};
    const auto y = random_array(shape, rng), p = random_array(shape, rng);
    worst = std::max(worst, std::abs(nrmse(y, p) - oracle_nrmse(y, p)));
    worst = std::max(worst, std::abs(brmse(y, p) - oracle_brmse(y, p)));
    worst = std::max(worst, std::abs(mse(y, p) - oracle_mse(y, p)));
    const auto h = error_heatmap(y, p);
    const auto ref = oracle_heatmap(y, p);
    for (std::size_t t = 0; t < shape[0]; ++t)
      for (std::size_t x = 0; x < shape[1]; ++x) worst = std::max(worst, std::abs(h.at({t, x}) - ref[t][x]));
  }
  return {worst < 1e-12, "max deviation from scalar oracles over 100 tensors " + fmt(worst) + " (< 1e-12)"};
}

Outcome burgers_reference() {
  // Conservation on full trajectories of random ICs.
  double drift = 0.0;
  const BurgersGrid grid{256, DomainMap{}};
  std::vector<double> times;
  for (int k = 0; k <= 20; ++k) times.push_back(0.1 * k);
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const auto ic = sample_ic(seed, IcConfig{});
    for (double nu : {0.001, 0.01}) {
      const auto tr = solve_burgers(ic, nu, grid, burgers_stable_dt(ic, nu, grid, 0.1), times);
      const double dx = grid.domain.length / static_cast<double>(grid.s);
      const double i0 = discrete_integral(tr, 0, dx);
      for (std::size_t k = 0; k < times.size(); ++k) drift = std::max(drift, std::abs(discrete_integral(tr, k, dx) - i0));
    }
  }
  const auto conv = burgers_convergence();
  const double order = std::min(conv.orders[0], conv.orders[1]);

  SinusoidalIC ic{{{0.5, 1, 0.3}}, 2.0};
  const double nu = 0.1;
  const auto tr = solve_burgers(ic, nu, grid, burgers_stable_dt(ic, nu, grid, 0.5), {0.0, 0.5});
  const auto x = periodic_grid(grid.domain, grid.s);
  double se = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) se += std::pow(tr.values.at({1, i, 0}) - cole_hopf(ic, nu, x[i], 0.5), 2);
  const double rms = std::sqrt(se / static_cast<double>(x.size()));
  return {drift < 1e-8 && order >= 1.8 && rms < 1e-3,
          "integral drift " + fmt(drift) + " (< 1e-8); convergence order " + fmt(order) + " (>= 1.8); Cole-Hopf RMS " +
              fmt(rms) + " (< 1e-3)"};
}

Outcome schedule_uniformity() {
  TrainConfig tc;
  tc.randomized_starts = true;
  const std::size_t nt = 41;
  std::vector<double> counts(41, 0.0);
  bool shape_ok = true;
  for (std::uint64_t e = 0; e < 1000; ++e) {
    const auto s = epoch_schedule(tc, 12345, e, nt);
    shape_ok = shape_ok && s.size() == 11 && s[0] == 0;
    std::set<std::size_t> seen(s.begin() + 1, s.end());
    shape_ok = shape_ok && seen.size() == 10 && *seen.begin() >= 1 && *seen.rbegin() <= 40;
    for (std::size_t i = 1; i < s.size(); ++i) counts[s[i]] += 1.0;
  }
  const double expected = 1000.0 * 10.0 / 40.0;
  double chi2 = 0.0;
  for (std::size_t k = 1; k <= 40; ++k) chi2 += std::pow(counts[k] - expected, 2) / expected;
  Eigen::ArrayXd a(1), x(1);
  a << 39.0 / 2.0;
  x << chi2 / 2.0;
  const double p = Eigen::igammac(a, x)(0);
  return {shape_ok && p > 0.01, std::string("schedules well formed: ") + (shape_ok ? "yes" : "no") + "; chi2 = " +
                                    fmt(chi2) + " on 39 dof, p = " + fmt(p) + " (> 0.01)"};
}

Outcome parameter_conditioning(const Learned& m) {
  const auto r = evaluate(m.store, m.test);
  const bool pass = r.nrmse_agg.mean < r.baseline_agg.mean && m.minutes <= 60.0;
  return {pass, "unseen beta=0.3: nRMSE " + fmt(r.nrmse_agg.mean) + " vs persistence " + fmt(r.baseline_agg.mean) +
                    "; trained in " + fmt(m.minutes) + " min (<= 60)"};
}

Outcome persistence() {
  namespace fs = std::filesystem;
  bool ok = true;
  std::string detail;
  // Dataset.
  DataConfig dc = advection_config(4, 32, 6, {0.4});
  const auto d = generate_dataset(dc, 3);
  const auto dpath = temp_file("acc_data.vcnf");
  write_dataset(d, dpath);
  const auto back = read_dataset(dpath);
  bool data_same = back.size() == d.size();
  for (std::size_t i = 0; data_same && i < d.size(); ++i) data_same = back.samples[i].values.identical(d.samples[i].values);
  ok = ok && data_same;
  // Checkpoints in both precisions.
  bool ck_same = true;
  const auto cpath = temp_file("acc_model.vcnp");
  {
    const auto s = init_parameters<double>(tiny_config());
    save_model(cpath, s);
    const auto l = load_model<double>(cpath);
    for (const auto& [k, v] : s.params) ck_same = ck_same && l.params.at(k).identical(v);
    const auto sf = init_parameters<float>(default_desk_config());
    save_model(cpath, sf);
    const auto lf = load_model<float>(cpath);
    for (const auto& [k, v] : sf.params) ck_same = ck_same && lf.params.at(k).identical(v);
  }
  ok = ok && ck_same;
  // Resume in 64-bit.
  TrainConfig tc;
  tc.epochs = 4;
  tc.batch_size = 2;
  tc.randomized_starts = true;
  tc.starts_per_epoch = 3;
  tc.seed = 8;
  TrainLog full, part;
  auto a = make_train_state(init_parameters<double>(tiny_config()), tc.seed);
  train(a, tc, d, &full);
  auto b = make_train_state(init_parameters<double>(tiny_config()), tc.seed);
  train(b, tc, d, &part, {}, 2);
  const auto spath = temp_file("acc_state.vcnp");
  save_train_state(spath, b);
  auto c = load_train_state<double>(spath);
  train(c, tc, d, &part);
  bool resume_same = full.steps.size() == part.steps.size();
  for (std::size_t i = 0; resume_same && i < full.steps.size(); ++i) {
    resume_same = full.steps[i].loss == part.steps[i].loss && full.steps[i].lr == part.steps[i].lr;
  }
  for (const auto& [k, v] : a.store.params) resume_same = resume_same && c.store.params.at(k).identical(v);
  ok = ok && resume_same;
  fs::remove(dpath);
  fs::remove(cpath);
  fs::remove(spath);
  return {ok, std::string("dataset bit-exact: ") + (data_same ? "yes" : "no") + "; checkpoints bit-exact: " +
                  (ck_same ? "yes" : "no") + "; resumed loss sequence identical over " +
                  std::to_string(full.steps.size()) + " steps: " + (resume_same ? "yes" : "no")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<int> only;
  std::size_t epochs = 80;
  app.add_option("--only", only, "Criteria to run")->delimiter(',');
  app.add_option("--epochs", epochs, "Epochs of the learning runs");
  CLI11_PARSE(app, argc, argv);
  const std::set<int> wanted(only.begin(), only.end());
  auto want = [&](int n) { return wanted.empty() || wanted.count(n); };

  std::printf("acceptance: %zu worker thread(s), %u hardware thread(s)\n", worker_threads(),
              std::thread::hardware_concurrency());
  int failed = 0;
  auto run = [&](int n, const char* title, double budget_s, const std::function<Outcome()>& fn) {
    if (!want(n)) return;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = seconds_since(t0);
    const bool in_time = budget_s <= 0.0 || secs <= budget_s;
    const bool pass = o.pass && in_time;
    failed += pass ? 0 : 1;
    std::printf("[%2d] %s  %s: %s [%.1f s%s]\n", n, pass ? "PASS" : "FAIL", title, o.detail.c_str(), secs,
                in_time ? "" : ", over budget");
    std::fflush(stdout);
  };

  run(1, "linear-attention equivalence", 1.0, attention_equivalence);
  run(2, "attention scaling", 120.0, attention_scaling);
  run(3, "end-to-end gradient check", 120.0, gradient_check);
  run(4, "parallel/sequential rollout", 300.0, rollout_equality);
  run(5, "1D permutation equivariance", 60.0, permutation_equivariance);

  std::optional<Learned> desk;
  if (want(6) || want(7) || want(8)) {
    std::printf("    training the desk model on advection beta=0.4 (%zu epochs)\n", epochs);
    desk = learn({0.4}, {0.4}, epochs);
  }
  // Training time is part of criterion 6; the evaluation budgets cover 7 and 8.
  run(6, "desk-scale learning", 0.0, [&] { return desk_learning(*desk); });
  run(7, "spatial zero-shot super-resolution", 300.0, [&] { return spatial_zssr(*desk); });
  run(8, "temporal zero-shot super-resolution", 300.0, [&] { return temporal_zssr(*desk); });
  desk.reset();

  run(9, "metric oracles", 60.0, metric_oracles);
  run(10, "Burgers reference solver", 600.0, burgers_reference);
  run(11, "starting-point schedule", 60.0, schedule_uniformity);

  if (want(12)) {
    std::printf("    training on advection beta in {0.2, 0.4} (%zu epochs)\n", epochs);
    const auto m = learn({0.2, 0.4}, {0.3}, epochs);
    run(12, "parameter conditioning", 0.0, [&] { return parameter_conditioning(m); });
  }
  run(13, "artifact persistence", 300.0, persistence);

  std::printf("acceptance: %s (%d failed)\n", failed ? "FAIL" : "PASS", failed);
  return failed ? 1 : 0;
}
