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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "metric_oracles.hpp"
#include "model_checks.hpp"
#include "test_util.hpp"
#include "vcnef/evaluation.hpp"
#include "vcnef/training.hpp"

using namespace vcnef;
using testing::code_of;
using testing::random_array;
using testing::temp_file;

namespace {

Dataset advection(std::size_t n, std::size_t s, std::size_t nt, std::uint64_t seed = 9) {
  DataConfig dc;
  dc.n_samples = n;
  dc.s = s;
  dc.nt = nt;
  return generate_dataset(dc, seed);
}

Array<double> scaled(const Array<double>& a, double k) {
  Array<double> out(a.shape());
  auto o = out.mutable_data();
  for (std::size_t i = 0; i < a.size(); ++i) o[i] = k * a[i];
  return out;
}

}  // namespace

TEST_CASE("nrmse trivial cases") {
  std::mt19937_64 rng(1);
  const auto y = random_array({4, 8, 1}, rng);
  CHECK(nrmse(y, y) == 0.0);
  CHECK(nrmse(y, scaled(y, 2.0)) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(nrmse(scaled(y, -3.5), scaled(scaled(y, 2.0), -3.5)) == doctest::Approx(nrmse(y, scaled(y, 2.0))));
}

TEST_CASE("metrics match the scalar oracles") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const Shape shape{1 + rng() % 6, 2 + rng() % 20, 1 + rng() % 3};
    const auto y = random_array(shape, rng), p = random_array(shape, rng);
    CHECK(std::abs(nrmse(y, p) - testing::oracle_nrmse(y, p)) < 1e-12);
    CHECK(std::abs(brmse(y, p) - testing::oracle_brmse(y, p)) < 1e-12);
    CHECK(std::abs(mse(y, p) - testing::oracle_mse(y, p)) < 1e-12);
    const auto h = error_heatmap(y, p);
    const auto ref = testing::oracle_heatmap(y, p);
    double worst = 0;
    for (std::size_t t = 0; t < shape[0]; ++t)
      for (std::size_t x = 0; x < shape[1]; ++x) worst = std::max(worst, std::abs(h.at({t, x}) - ref[t][x]));
    CHECK(worst < 1e-12);
  }
  // The fixed 5x16x2 case.
  const auto y = random_array({5, 16, 2}, rng), p = random_array({5, 16, 2}, rng);
  CHECK(std::abs(nrmse(y, p) - testing::oracle_nrmse(y, p)) < 1e-12);
}

TEST_CASE("zero-norm slices are skipped and counted") {
  std::mt19937_64 rng(3);
  auto y = random_array({3, 8, 1}, rng);
  auto p = random_array({3, 8, 1}, rng);
  auto yo = y.mutable_data();
  for (std::size_t i = 8; i < 16; ++i) yo[i] = 0.0;
  std::size_t skipped = 0;
  const double v = nrmse(y, p, &skipped);
  CHECK(skipped == 1);
  CHECK(std::isfinite(v));
  CHECK(v == doctest::Approx(testing::oracle_nrmse(y, p)).epsilon(1e-12));

  const auto h = error_heatmap(y, p);
  for (std::size_t x = 0; x < 8; ++x) CHECK(h.at({1, x}) == kHeatmapSentinel);
  Array<double> sum;
  std::vector<std::size_t> count;
  accumulate_heatmap(sum, count, h);
  accumulate_heatmap(sum, count, h);
  CHECK(count[8] == 0);
  CHECK(count[0] == 2);
  CHECK(sum[0] == doctest::Approx(2 * h[0]));
}

TEST_CASE("brmse of equal boundary errors is the error") {
  Array<double> y({2, 6, 1}, 1.0);
  auto p = y;
  auto o = p.mutable_data();
  for (std::size_t t = 0; t < 2; ++t) {
    o[t * 6] += 0.3;
    o[t * 6 + 5] -= 0.3;
  }
  CHECK(brmse(y, y) == 0.0);
  CHECK(brmse(y, p) == doctest::Approx(0.3).epsilon(1e-14));
}

TEST_CASE("heatmap of a zero prediction is all ones") {
  std::mt19937_64 rng(4);
  const auto y = random_array({3, 5, 1}, rng, 0.5, 1.5);
  const auto h = error_heatmap(y, Array<double>(y.shape()));
  for (double v : h.data()) CHECK(v == doctest::Approx(1.0));
  const auto exact = error_heatmap(y, y);
  for (double v : exact.data()) CHECK(v == 0.0);
}

TEST_CASE("persistence baseline repeats the conditioning frame") {
  const auto d = advection(3, 32, 11);
  const auto& tr = d.samples[0];
  const auto b = persistence_baseline(tr.frame(0), 10);
  for (std::size_t k = 0; k < 10; ++k)
    for (std::size_t i = 0; i < 32; ++i) CHECK(b.at({k, i, 0}) == tr.values.at({0, i, 0}));
  const auto y = target_frames<double>(tr, 0);
  CHECK(nrmse(y, b) > 0.0);
  CHECK(nrmse(y, b) == doctest::Approx(testing::oracle_nrmse(y, b)).epsilon(1e-12));

  // Error vanishes as the horizon shrinks.
  double prev = 1e300;
  for (double tf : {1e-1, 1e-2, 1e-3}) {
    DataConfig dc;
    dc.n_samples = 1;
    dc.s = 32;
    dc.nt = 2;
    dc.t_final = tf;
    const auto near = generate_dataset(dc, 3);
    const double e = nrmse(target_frames<double>(near.samples[0], 0), persistence_baseline(near.samples[0].frame(0), 1));
    CHECK(e < prev);
    prev = e;
  }
  CHECK(prev < 1e-2);
}

TEST_CASE("mean predictor averages targets over the dataset") {
  const auto d = advection(4, 16, 5);
  const auto m = mean_predictor(d, 1);
  REQUIRE(m.shape() == Shape{3, 16, 1});
  double ref = 0;
  for (const auto& tr : d.samples) ref += tr.values.at({3, 7, 0});
  CHECK(m.at({1, 7, 0}) == doctest::Approx(ref / 4).epsilon(1e-14));
}

TEST_CASE("report aggregates recompute from per-sample values") {
  const auto d = advection(5, 16, 5);
  const auto store = init_parameters<double>(testing::tiny_config());
  Dataset pred;
  auto r = evaluate(store, d, {}, &pred);
  REQUIRE(r.nrmse.size() == 5);
  const auto ms = mean_std(r.nrmse);
  CHECK(std::abs(ms.mean - r.nrmse_agg.mean) < 1e-12);
  CHECK(std::abs(ms.std - r.nrmse_agg.std) < 1e-12);
  CHECK(r.temporal_mean.size() == 4);
  CHECK(r.heatmap.shape() == Shape{4, 16});

  // Metrics recomputed from the saved predictions.
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto y = target_frames<double>(d.samples[i], 0);
    const auto p = target_frames<double>(pred.samples[i], 0);
    CHECK(std::abs(testing::oracle_nrmse(y, p) - r.nrmse[i]) < 1e-12);
    CHECK(std::abs(testing::oracle_brmse(y, p) - r.brmse[i]) < 1e-12);
    for (std::size_t x = 0; x < 16; ++x) CHECK(pred.samples[i].values.at({0, x, 0}) == d.samples[i].values.at({0, x, 0}));
  }

  EvalReport other = r;
  for (auto& v : other.nrmse) v *= 2;
  other.aggregate();
  const auto seeds = aggregate_seeds({r, other});
  CHECK(seeds.mean == doctest::Approx(1.5 * r.nrmse_agg.mean));
  CHECK(seeds.std == doctest::Approx(0.5 * r.nrmse_agg.mean));
}

TEST_CASE("sequential evaluation matches parallel") {
  const auto d = advection(2, 16, 6);
  const auto store = init_parameters<double>(testing::tiny_config());
  EvalOptions seq;
  seq.mode = RolloutMode::kSequential;
  const auto a = evaluate(store, d), b = evaluate(store, d, seq);
  for (std::size_t i = 0; i < 2; ++i) CHECK(std::abs(a.nrmse[i] - b.nrmse[i]) < 1e-12);
}

TEST_CASE("incompatible checkpoints are refused") {
  const auto d = advection(1, 16, 5);
  auto cfg = testing::tiny_config();
  cfg.j = 2;
  CHECK(code_of([&] { check_compatible(cfg, d); }) == ErrorCode::kMetadata);
  cfg.j = 1;
  cfg.c = 2;
  CHECK(code_of([&] { check_compatible(cfg, d); }) == ErrorCode::kMetadata);
  CHECK(code_of([&] { evaluate(init_parameters<double>(cfg), d); }) == ErrorCode::kMetadata);
}

TEST_CASE("spatial super-resolution at the training grid reproduces plain evaluation") {
  const auto fine = advection(2, 32, 5);
  const auto store = init_parameters<double>(testing::tiny_config());
  const auto same = eval_spatial_zssr(store, fine, 32);
  const auto plain = evaluate(store, fine);
  for (std::size_t i = 0; i < 2; ++i) CHECK(same.train_res.nrmse[i] == plain.nrmse[i]);
  CHECK(same.ratio == 1.0);

  const auto z = eval_spatial_zssr(store, fine, 16);
  CHECK(std::isfinite(z.ratio));
  CHECK(z.fine.heatmap.shape() == Shape{4, 32});
  CHECK(z.train_res.heatmap.shape() == Shape{4, 16});
  CHECK(code_of([&] { eval_spatial_zssr(store, fine, 12); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("dense time queries agree with coarse ones at shared times") {
  const auto dense = advection(2, 16, 9);
  const auto store = init_parameters<double>(testing::tiny_config());
  const auto z = eval_temporal_zssr(store, dense, 5);
  CHECK(z.shared_max_diff < 1e-12);
  CHECK(z.dense.temporal_mean.size() == 8);
  CHECK(z.coarse.temporal_mean.size() == 4);
  CHECK(std::isfinite(z.ratio));
  CHECK(code_of([&] { eval_temporal_zssr(store, dense, 4); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("bench records every mode and step count") {
  std::mt19937_64 rng(6);
  const auto store = init_parameters<double>(testing::tiny_config());
  const auto in = testing::random_input_1d<double>(8, 1, rng);
  BenchOptions opts;
  opts.steps = {4, 8};
  opts.warmups = 1;
  opts.runs = 3;
  const auto rows = bench_rollout(store, in, opts);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].mode == "parallel");
  CHECK(rows[3].mode == "sequential");
  CHECK(rows[1].n_steps == 8);
  for (const auto& r : rows) CHECK(r.wall_ms >= 0.0);
  CHECK(rows[1].peak_bytes > rows[0].peak_bytes);

  opts.tolerance = -1.0;  // nothing can pass
  CHECK(code_of([&] { bench_rollout(store, in, opts); }) == ErrorCode::kMismatch);
}

TEST_CASE("report exports") {
  const auto d = advection(2, 8, 4);
  auto r = evaluate(init_parameters<double>(testing::tiny_config()), d);
  r.timing = {{"parallel", 4, 1.5, 100}};
  const auto j = report_to_json(r);
  CHECK(j["nrmse"]["mean"].get<double>() == r.nrmse_agg.mean);
  CHECK(j["per_sample"]["nrmse"].size() == 2);
  CHECK(j["timing"][0]["peak_bytes"] == 100);

  const auto tp = temp_file("temporal.csv"), hp = temp_file("heatmap.csv"), bp = temp_file("bench.csv");
  write_temporal_csv(tp, r);
  write_heatmap_csv(hp, r.heatmap);
  write_bench_csv(bp, r.timing);
  std::ifstream t(tp), h(hp), b(bp);
  std::string line;
  std::getline(t, line);
  CHECK(line == "t,mean,std");
  int rows = 0;
  while (std::getline(h, line)) {
    ++rows;
    CHECK(std::count(line.begin(), line.end(), ',') == 7);
  }
  CHECK(rows == 3);
  std::getline(b, line);
  CHECK(line == "mode,n_steps,wall_ms_median,peak_bytes");
  std::getline(b, line);
  CHECK(line == "parallel,4,1.5,100");
  std::filesystem::remove(tp);
  std::filesystem::remove(hp);
  std::filesystem::remove(bp);
}
