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

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <vector>

#include "model_checks.hpp"
#include "test_util.hpp"
#include "vcnef/checkpoint.hpp"
#include "vcnef/training.hpp"

using namespace vcnef;
using testing::code_of;
using testing::temp_file;

namespace {

Dataset small_dataset(std::size_t n, std::uint64_t seed = 5) {
  DataConfig dc;
  dc.n_samples = n;
  dc.s = 16;
  dc.nt = 5;
  return generate_dataset(dc, seed);
}

TrainConfig small_train(std::size_t epochs) {
  TrainConfig tc;
  tc.epochs = epochs;
  tc.batch_size = 2;
  tc.max_lr = 3e-3;
  tc.precision = "f64";
  return tc;
}

bool same_params(const ParamMap<double>& a, const ParamMap<double>& b) {
  for (const auto& [k, v] : a) {
    const auto& w = b.at(k);
    if (!std::equal(v.data().begin(), v.data().end(), w.data().begin())) return false;
  }
  return a.size() == b.size();
}

}  // namespace

TEST_CASE("mse matches a scalar loop and its gradient is 2(p - t)/n") {
  std::mt19937_64 rng(11);
  const auto p = testing::random_array({3, 5, 2}, rng), t = testing::random_array({3, 5, 2}, rng);
  double ref = 0;
  for (std::size_t i = 0; i < p.size(); ++i) ref += (p[i] - t[i]) * (p[i] - t[i]);
  ref /= 30.0;
  CHECK(std::abs(mse_loss(p, t) - ref) < 1e-14);

  Graph<double> g;
  const auto pv = g.leaf("p", p);
  const auto loss = mse_loss(pv, Var<double>(t));
  CHECK(std::abs(loss.value().item() - ref) < 1e-14);
  const auto grad = g.backward(loss).at("p");
  for (std::size_t i = 0; i < p.size(); ++i) CHECK(std::abs(grad[i] - 2.0 * (p[i] - t[i]) / 30.0) < 1e-14);
  CHECK(code_of([&] { mse_loss(p, Array<double>({30})); }) == ErrorCode::kShape);
}

TEST_CASE("one-cycle schedule hits its anchor points") {
  const OneCycle oc;
  const double max_lr = 3e-3;
  CHECK(one_cycle_lr(0, 1000, max_lr, oc) == doctest::Approx(max_lr * 1e-3).epsilon(1e-12));
  CHECK(one_cycle_lr(200, 1000, max_lr, oc) == doctest::Approx(max_lr).epsilon(1e-12));
  CHECK(one_cycle_lr(1000, 1000, max_lr, oc) == doctest::Approx(max_lr * 1e-4).epsilon(1e-12));
  double prev = 0;
  for (std::size_t s = 0; s <= 200; ++s) {
    const double lr = one_cycle_lr(s, 1000, max_lr, oc);
    CHECK(lr >= prev);
    prev = lr;
  }
  for (std::size_t s = 201; s <= 1000; ++s) {
    const double lr = one_cycle_lr(s, 1000, max_lr, oc);
    CHECK(lr <= prev);
    prev = lr;
  }
}

TEST_CASE("starting-point schedule is [0] plus distinct frames") {
  std::mt19937_64 rng(2);
  for (int e = 0; e < 50; ++e) {
    const auto s = starting_point_schedule(rng, 41);
    REQUIRE(s.size() == 11);
    CHECK(s[0] == 0);
    const std::set<std::size_t> rest(s.begin() + 1, s.end());
    CHECK(rest.size() == 10);
    CHECK(*rest.begin() >= 1);
    CHECK(*rest.rbegin() <= 40);
  }
  // Fewer than ten later frames: all of them, once each.
  const auto s = starting_point_schedule(rng, 5);
  REQUIRE(s.size() == 5);
  CHECK(std::set<std::size_t>(s.begin() + 1, s.end()) == std::set<std::size_t>{1, 2, 3, 4});
  CHECK(code_of([&] { starting_point_schedule(rng, 1); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("inputs and targets are sliced from the trajectory") {
  const auto d = small_dataset(2);
  const auto& tr = d.samples[1];
  const auto in = field_input<double>(d, 1, 2);
  const auto y = target_frames<double>(tr, 2);
  REQUIRE(y.shape() == Shape{2, 16, 1});
  for (std::size_t i = 0; i < 16; ++i) {
    CHECK(in.u0[i] == tr.values[2 * 16 + i]);
    CHECK(y[i] == tr.values[3 * 16 + i]);
    CHECK(y[16 + i] == tr.values[4 * 16 + i]);
    CHECK(in.x[i] == doctest::Approx(static_cast<double>(i) / 16.0).epsilon(1e-14));
  }
  CHECK(in.p[0] == tr.params[0]);
  const auto rel = query_times(d.meta.times, 2, false), abs = query_times(d.meta.times, 2, true);
  REQUIRE(rel.size() == 2);
  CHECK(rel[0] == doctest::Approx(d.meta.times[3] - d.meta.times[2]));
  CHECK(abs[1] == d.meta.times[4]);
  CHECK(code_of([&] { target_frames<double>(tr, 4); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("a zero learning rate leaves parameters untouched") {
  const auto d = small_dataset(2);
  auto st = make_train_state(init_parameters<double>(testing::tiny_config()), 1);
  const auto before = st.store.params;
  const auto rec = train_step(st, small_train(1), d, {0, 1}, 0, 0.0);
  CHECK(same_params(before, st.store.params));
  CHECK(st.step == 1);
  CHECK(rec.loss > 0);
  CHECK(rec.grad_norm > 0);
}

TEST_CASE("a single trajectory can be overfit") {
  // One smooth sample, so the check is about the optimizer rather than the
  // spectral reach of a small model.
  DataConfig dc;
  dc.n_samples = 1;
  dc.s = 32;
  dc.nt = 5;
  dc.ic.modes = 2;
  dc.ic.max_mode = 1;
  const auto d = generate_dataset(dc, 5);
  ModelConfig m;
  m.d = 64;
  m.heads = 2;
  m.n_enc = 1;
  m.n_mod = 1;
  auto st = make_train_state(init_parameters<double>(m), 1);
  const TrainConfig tc;
  const std::size_t steps = 200;
  double first = 0.0, last = 0.0;
  for (std::size_t i = 0; i < steps; ++i) {
    last = train_step(st, tc, d, {0}, 0, one_cycle_lr(i, steps, 1e-2, tc.schedule)).loss;
    if (i == 0) first = last;
  }
  MESSAGE("overfit loss " << first << " -> " << last);
  CHECK(last < 1e-3 * first);
}

TEST_CASE("the access log shows which frames condition each step") {
  const auto d = small_dataset(4);
  auto tc = small_train(2);
  TrainLog log;
  log.record_access = true;
  auto st = make_train_state(init_parameters<double>(testing::tiny_config()), 1);
  train(st, tc, d, &log);
  REQUIRE(log.access.size() == 8);
  for (const auto& a : log.access) CHECK(a.frame == 0);
  CHECK(log.steps.size() == total_steps(tc, st.seed, 4, 5));

  tc.randomized_starts = true;
  TrainLog rlog;
  rlog.record_access = true;
  auto rst = make_train_state(init_parameters<double>(testing::tiny_config()), 1);
  train(rst, tc, d, &rlog);
  // N_t = 5 leaves four later frames, so each epoch draws all five; the
  // last one has no targets and is skipped.
  REQUIRE(rlog.schedules.size() == 2);
  for (const auto& s : rlog.schedules) CHECK(s.size() == 5);
  CHECK(rlog.access.size() == 2 * 4 * 4);
  CHECK(rlog.steps.size() == total_steps(tc, rst.seed, 4, 5));
  std::set<std::size_t> frames;
  for (const auto& a : rlog.access) frames.insert(a.frame);
  CHECK(frames == std::set<std::size_t>{0, 1, 2, 3});
}

TEST_CASE("training is deterministic and resumes bit-exactly") {
  const auto d = small_dataset(4);
  auto tc = small_train(3);
  tc.randomized_starts = true;
  const auto init = init_parameters<double>(testing::tiny_config());

  auto a = make_train_state(init, 9);
  TrainLog la;
  train(a, tc, d, &la);
  auto b = make_train_state(init, 9);
  TrainLog lb;
  train(b, tc, d, &lb);
  CHECK(same_params(a.store.params, b.store.params));

  auto c = make_train_state(init, 9);
  TrainLog lc;
  train(c, tc, d, &lc, {}, 1);
  const auto path = temp_file("resume.vcnp");
  save_train_state(path, c);
  auto r = load_train_state<double>(path);
  CHECK(r.step == c.step);
  CHECK(r.epoch == 1);
  train(r, tc, d, &lc);
  REQUIRE(lc.steps.size() == la.steps.size());
  for (std::size_t i = 0; i < la.steps.size(); ++i) {
    CHECK(lc.steps[i].loss == la.steps[i].loss);
    CHECK(lc.steps[i].lr == la.steps[i].lr);
  }
  CHECK(same_params(r.store.params, a.store.params));
  std::filesystem::remove(path);
}

TEST_CASE("tampered training checkpoints are rejected") {
  auto st = make_train_state(init_parameters<double>(testing::tiny_config()), 1);
  const auto path = temp_file("tamper.vcnp");
  save_train_state(path, st);
  const auto size = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, size - 3);
  CHECK(code_of([&] { load_train_state<double>(path); }) == ErrorCode::kTruncated);

  // A plain model checkpoint lacks the optimizer state.
  save_model(path, st.store);
  CHECK(code_of([&] { load_train_state<double>(path); }) == ErrorCode::kMetadata);
  std::filesystem::remove(path);
}

TEST_CASE("a non-finite loss stops training with context") {
  const auto d = small_dataset(2);
  auto st = make_train_state(init_parameters<double>(testing::tiny_config()), 1);
  st.store.params.at("dec.b2").mutable_data()[0] = std::nan("");
  try {
    train_step(st, small_train(1), d, {0}, 0, 1e-3);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNonFinite);
    CHECK(std::string(e.what()).find("step 0") != std::string::npos);
    CHECK(std::string(e.what()).find("grad_norm") != std::string::npos);
  }
}

TEST_CASE("clipping rescales the gradient fed to Adam") {
  const auto d = small_dataset(2);
  auto tc = small_train(1);
  const auto init = make_train_state(init_parameters<double>(testing::tiny_config()), 1);
  auto a = init, b = init;
  const double norm = train_step(a, tc, d, {0, 1}, 0, 1e-3).grad_norm;
  tc.clip = true;
  tc.clip_norm = 0.25 * norm;
  const auto rec = train_step(b, tc, d, {0, 1}, 0, 1e-3);
  CHECK(rec.grad_norm == norm);  // logged before clipping
  // First moments are (1 - beta1) g, so the clipped ones are a quarter.
  for (const auto& [k, m] : a.m) {
    Array<double> scaled = m;
    for (auto& x : scaled.mutable_data()) x *= 0.25;
    CHECK(testing::rel_err(b.m.at(k), scaled, 1e-300) < 1e-12);
  }
}

TEST_CASE("train config JSON is strict and round-trips") {
  TrainConfig tc;
  tc.epochs = 7;
  tc.randomized_starts = true;
  tc.max_lr = 1e-3;
  const auto back = train_config_from_json(train_config_to_json(tc));
  CHECK(back.epochs == 7);
  CHECK(back.randomized_starts);
  CHECK(back.max_lr == 1e-3);
  auto j = train_config_to_json(tc);
  j["learning_rate"] = 1;
  CHECK(code_of([&] { train_config_from_json(j); }) == ErrorCode::kConfig);
  j = train_config_to_json(tc);
  j["precision"] = "f16";
  CHECK(code_of([&] { train_config_from_json(j); }) == ErrorCode::kConfig);
}

TEST_CASE("training CSV log has a header and one row per step") {
  const auto path = temp_file("train.csv");
  std::filesystem::remove(path);
  append_train_csv(path, {{0, 1, 1e-3, 0.5, 1.0, 2.0}, {0, 2, 2e-3, 0.4, 0.9, 2.0}});
  append_train_csv(path, {{1, 3, 3e-3, 0.3, 0.8, 2.0}});
  std::ifstream in(path);
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);
  REQUIRE(lines.size() == 4);
  CHECK(lines[0] == "epoch,step,lr,loss,grad_norm,wall_ms");
  CHECK(lines[3].rfind("1,3,", 0) == 0);
  std::filesystem::remove(path);
}

TEST_CASE("losses do not depend on where buffers are allocated") {
  DataConfig dc;
  dc.n_samples = 8;
  dc.s = 64;
  dc.nt = 21;
  const auto d = generate_dataset(dc, 5);
  ModelConfig m;
  m.d = 64;
  const auto init = init_parameters<float>(m);
  auto run = [&] {
    auto st = make_train_state(init, 1);
    TrainConfig tc;
    std::vector<double> losses;
    for (std::size_t i = 0; i < 4; ++i) losses.push_back(train_step(st, tc, d, {i, i + 4}, 0, 1e-3).loss);
    return losses;
  };
  const auto a = run();
  // Odd-sized live blocks shift every later allocation.
  std::vector<Array<float>> held;
  for (std::size_t k = 1; k < 40; ++k) held.emplace_back(Shape{k * 4099 + 17}, 0.0f);
  const auto b = run();
  CHECK(a == b);
}
