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

#include "vcnef/vcnef.h"

#include <cstring>
#include <exception>
#include <memory>
#include <string>
#include <variant>

#include "vcnef/checkpoint.hpp"
#include "vcnef/commands.hpp"
#include "vcnef/error.hpp"
#include "vcnef/run_config.hpp"
#include "vcnef/training.hpp"

struct vcnef_config {
  vcnef::RunConfig cfg;
};

struct vcnef_dataset {
  vcnef::Dataset data;
};

struct vcnef_model {
  std::variant<vcnef::ParameterStore<float>, vcnef::ParameterStore<double>> store;
};

namespace {

thread_local std::string g_last_error;

template <typename F>
vcnef_status guard(F&& f) {
  try {
    g_last_error.clear();
    f();
    return VCNEF_OK;
  } catch (const vcnef::Error& e) {
    g_last_error = e.what();
    return static_cast<vcnef_status>(static_cast<int>(e.code()));
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown exception";
  }
  return VCNEF_ERR_INTERNAL;
}

void need(const void* p, const char* what) {
  if (!p) throw vcnef::Error(vcnef::ErrorCode::kInvalidArgument, std::string(what) + " is null");
}

vcnef::LogFn sink(vcnef_log_fn fn, void* user) {
  return [fn, user](const std::string& line) {
    if (fn) fn(line.c_str(), user);
  };
}

}  // namespace

extern "C" {

const char* vcnef_version(void) { return "0.1.0"; }

const char* vcnef_status_name(int status) {
  if (status == VCNEF_OK) return "ok";
  if (status < 1 || status > 12) return "unknown";
  return vcnef::error_code_name(static_cast<vcnef::ErrorCode>(status));
}

const char* vcnef_last_error(void) { return g_last_error.c_str(); }

vcnef_status vcnef_config_default(vcnef_config** out) {
  return guard([&] {
    need(out, "out");
    auto c = std::make_unique<vcnef_config>();
    c->cfg.resolve();
    *out = c.release();
  });
}

vcnef_status vcnef_config_load(const char* path, vcnef_config** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    *out = new vcnef_config{vcnef::load_run_config(path)};
  });
}

vcnef_status vcnef_config_parse(const char* json, vcnef_config** out) {
  return guard([&] {
    need(json, "json");
    need(out, "out");
    auto j = nlohmann::json::parse(json, nullptr, false);
    if (j.is_discarded()) throw vcnef::Error(vcnef::ErrorCode::kConfig, "config is not valid JSON");
    *out = new vcnef_config{vcnef::run_config_from_json(j)};
  });
}

vcnef_status vcnef_config_override(vcnef_config* cfg, const char* assignment) {
  return guard([&] {
    need(cfg, "config");
    need(assignment, "assignment");
    cfg->cfg = vcnef::apply_override(cfg->cfg, assignment);
  });
}

vcnef_status vcnef_config_dump(const vcnef_config* cfg, char* buf, size_t cap, size_t* needed) {
  return guard([&] {
    need(cfg, "config");
    const std::string s = vcnef::run_config_to_json(cfg->cfg).dump(2);
    if (needed) *needed = s.size() + 1;
    if (buf && cap >= s.size() + 1) std::memcpy(buf, s.c_str(), s.size() + 1);
    else if (buf) throw vcnef::Error(vcnef::ErrorCode::kInvalidArgument, "buffer too small");
  });
}

vcnef_status vcnef_config_hash(const vcnef_config* cfg, char out[17]) {
  return guard([&] {
    need(cfg, "config");
    need(out, "out");
    const std::string h = vcnef::config_hash(cfg->cfg);
    std::memcpy(out, h.c_str(), 17);
  });
}

void vcnef_config_free(vcnef_config* cfg) { delete cfg; }

vcnef_status vcnef_dataset_generate(const vcnef_config* cfg, vcnef_dataset** out) {
  return guard([&] {
    need(cfg, "config");
    need(out, "out");
    auto d = std::make_unique<vcnef_dataset>();
    d->data = vcnef::generate_dataset(cfg->cfg.data, cfg->cfg.data_seed());
    d->data.meta.config_hash = vcnef::config_hash(cfg->cfg);
    *out = d.release();
  });
}

vcnef_status vcnef_dataset_read(const char* path, vcnef_dataset** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    *out = new vcnef_dataset{vcnef::read_dataset(path)};
  });
}

vcnef_status vcnef_dataset_write(const vcnef_dataset* d, const char* path) {
  return guard([&] {
    need(d, "dataset");
    need(path, "path");
    vcnef::write_dataset(d->data, path);
  });
}

vcnef_status vcnef_dataset_info_get(const vcnef_dataset* d, vcnef_dataset_info* out) {
  return guard([&] {
    need(d, "dataset");
    need(out, "out");
    const auto& m = d->data.meta;
    *out = {d->data.size(), m.nt, m.s, m.c, m.seed};
  });
}

vcnef_status vcnef_dataset_values(const vcnef_dataset* d, size_t sample, double* out, size_t cap) {
  return guard([&] {
    need(d, "dataset");
    need(out, "out");
    if (sample >= d->data.size()) throw vcnef::Error(vcnef::ErrorCode::kInvalidArgument, "sample out of range");
    const auto v = d->data.samples[sample].values.data();
    if (cap < v.size()) throw vcnef::Error(vcnef::ErrorCode::kInvalidArgument, "buffer too small");
    std::memcpy(out, v.data(), v.size() * sizeof(double));
  });
}

vcnef_status vcnef_dataset_times(const vcnef_dataset* d, double* out, size_t cap) {
  return guard([&] {
    need(d, "dataset");
    need(out, "out");
    const auto& t = d->data.meta.times;
    if (cap < t.size()) throw vcnef::Error(vcnef::ErrorCode::kInvalidArgument, "buffer too small");
    std::memcpy(out, t.data(), t.size() * sizeof(double));
  });
}

void vcnef_dataset_free(vcnef_dataset* d) { delete d; }

vcnef_status vcnef_model_init(const vcnef_config* cfg, vcnef_model** out) {
  return guard([&] {
    need(cfg, "config");
    need(out, "out");
    auto m = std::make_unique<vcnef_model>();
    if (cfg->cfg.train.precision == "f64") m->store = vcnef::init_parameters<double>(cfg->cfg.model);
    else m->store = vcnef::init_parameters<float>(cfg->cfg.model);
    *out = m.release();
  });
}

vcnef_status vcnef_model_load(const char* path, vcnef_model** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    auto m = std::make_unique<vcnef_model>();
    const auto ck = vcnef::read_checkpoint<double>(path);
    if (ck.meta.value("dtype", std::string()) == "f64") m->store = vcnef::store_from_checkpoint(ck);
    else m->store = vcnef::load_model<float>(path);
    *out = m.release();
  });
}

vcnef_status vcnef_model_save(const vcnef_model* m, const char* path) {
  return guard([&] {
    need(m, "model");
    need(path, "path");
    std::visit([&](const auto& s) { vcnef::save_model(path, s); }, m->store);
  });
}

vcnef_status vcnef_model_param_count(const vcnef_model* m, size_t* out) {
  return guard([&] {
    need(m, "model");
    need(out, "out");
    *out = std::visit([](const auto& s) { return s.count(); }, m->store);
  });
}

vcnef_status vcnef_model_predict(const vcnef_model* m, const vcnef_dataset* d, size_t sample, size_t start,
                                 const double* times, size_t n_times, vcnef_mode mode, double* out, size_t cap) {
  return guard([&] {
    need(m, "model");
    need(d, "dataset");
    need(out, "out");
    if (n_times > 0) need(times, "times");
    if (sample >= d->data.size() || start >= d->data.meta.nt) {
      throw vcnef::Error(vcnef::ErrorCode::kInvalidArgument, "sample or start frame out of range");
    }
    const std::vector<double> t(times, times + n_times);
    const auto rm = mode == VCNEF_SEQUENTIAL ? vcnef::RolloutMode::kSequential : vcnef::RolloutMode::kParallel;
    std::visit(
        [&](const auto& s) {
          using T = typename std::decay_t<decltype(s.params.begin()->second)>::value_type;
          vcnef::check_compatible(s.config, d->data);
          const auto y = vcnef::forward(s, vcnef::field_input<T>(d->data, sample, start), t, rm);
          if (cap < y.size()) throw vcnef::Error(vcnef::ErrorCode::kInvalidArgument, "buffer too small");
          for (std::size_t i = 0; i < y.size(); ++i) out[i] = static_cast<double>(y[i]);
        },
        m->store);
  });
}

void vcnef_model_free(vcnef_model* m) { delete m; }

vcnef_status vcnef_cmd_generate(const vcnef_config* cfg, const char* out_dir, vcnef_log_fn log, void* user) {
  return guard([&] {
    need(cfg, "config");
    need(out_dir, "out_dir");
    vcnef::cmd_generate(cfg->cfg, out_dir, sink(log, user));
  });
}

vcnef_status vcnef_cmd_train(const vcnef_config* cfg, const char* dataset, const char* out_dir, int resume,
                             size_t stop_epoch, vcnef_log_fn log, void* user) {
  return guard([&] {
    need(cfg, "config");
    need(dataset, "dataset");
    need(out_dir, "out_dir");
    vcnef::cmd_train(cfg->cfg, dataset, out_dir, resume != 0, sink(log, user), stop_epoch);
  });
}

vcnef_status vcnef_cmd_eval(const vcnef_config* cfg, const char* checkpoint, const char* dataset,
                            const char* out_dir, vcnef_log_fn log, void* user) {
  return guard([&] {
    need(cfg, "config");
    need(checkpoint, "checkpoint");
    need(dataset, "dataset");
    need(out_dir, "out_dir");
    vcnef::cmd_eval(cfg->cfg, checkpoint, dataset, out_dir, sink(log, user));
  });
}

vcnef_status vcnef_cmd_bench(const vcnef_config* cfg, const char* checkpoint, const char* dataset,
                             const char* out_dir, vcnef_log_fn log, void* user) {
  return guard([&] {
    need(cfg, "config");
    need(checkpoint, "checkpoint");
    need(out_dir, "out_dir");
    vcnef::cmd_bench(cfg->cfg, checkpoint, dataset ? dataset : "", out_dir, sink(log, user));
  });
}

}  // extern "C"
