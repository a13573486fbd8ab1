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

#include "test_util.hpp"
#include "vcnef/rng.hpp"
#include "vcnef/run_config.hpp"

using namespace vcnef;
using testing::code_of;

TEST_CASE("unknown keys are rejected at every level") {
  CHECK(code_of([] { run_config_from_json({{"extra", 1}}); }) == ErrorCode::kConfig);
  CHECK(code_of([] { run_config_from_json({{"data", {{"ic", {{"wobble", 2}}}}}}); }) == ErrorCode::kConfig);
  CHECK(code_of([] { run_config_from_json({{"model", {{"width", 2}}}}); }) == ErrorCode::kConfig);
  CHECK(code_of([] { run_config_from_json({{"train", {{"seed", 2}}}}); }) == ErrorCode::kConfig);
  CHECK(code_of([] { run_config_from_json({{"eval", {{"mode", "diagonal"}}}}); }) == ErrorCode::kConfig);
  CHECK(code_of([] { run_config_from_json({{"data", {{"s", "wide"}}}}); }) == ErrorCode::kConfig);
}

TEST_CASE("the root seed splits into independent streams") {
  const auto c = run_config_from_json({{"seed", 7}});
  CHECK(c.data_seed() == derive_seed(7, std::string_view("data")));
  CHECK(c.model.seed == derive_seed(7, std::string_view("init")));
  CHECK(c.train.seed == derive_seed(7, std::string_view("train")));
  CHECK(c.data_seed() != c.model.seed);
  CHECK(c.model.t_norm == c.data.t_final);
}

TEST_CASE("json round trip, overrides and hash") {
  auto c = run_config_from_json({{"seed", 2}, {"data", {{"s", 32}, {"params", {0.2, 0.4}}}}, {"train", {{"epochs", 3}}}});
  const auto back = run_config_from_json(run_config_to_json(c));
  CHECK(run_config_to_json(back) == run_config_to_json(c));
  CHECK(config_hash(back) == config_hash(c));
  CHECK(config_hash(c).size() == 16);

  const auto o = apply_override(c, "train.max_lr=0.01");
  CHECK(o.train.max_lr == 0.01);
  CHECK(config_hash(o) != config_hash(c));
  CHECK(apply_override(c, "eval.mode=sequential").eval.mode == "sequential");
  CHECK(apply_override(c, "data.params=[0.3]").data.params == std::vector<double>{0.3});
  CHECK(code_of([&] { apply_override(c, "novalue"); }) == ErrorCode::kConfig);
  CHECK(code_of([&] { apply_override(c, "train.epochs=-1"); }) == ErrorCode::kConfig);
}
