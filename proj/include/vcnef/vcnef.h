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

/* C interface to the VCNeF library. Objects are opaque handles released with
 * the matching *_free function. Every call returns a vcnef_status; on failure
 * vcnef_last_error() describes it until the next call on the same thread. */
#ifndef VCNEF_VCNEF_H_
#define VCNEF_VCNEF_H_

#include <stddef.h>
#include <stdint.h>

#if defined(VCNEF_BUILDING_LIBRARY)
#define VCNEF_API __attribute__((visibility("default")))
#else
#define VCNEF_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum vcnef_status {
  VCNEF_OK = 0,
  VCNEF_ERR_INVALID_ARGUMENT = 1,
  VCNEF_ERR_SHAPE = 2,
  VCNEF_ERR_NON_FINITE = 3,
  VCNEF_ERR_IO = 4,
  VCNEF_ERR_BAD_MAGIC = 5,
  VCNEF_ERR_TRUNCATED = 6,
  VCNEF_ERR_METADATA = 7,
  VCNEF_ERR_VERSION = 8,
  VCNEF_ERR_CONFIG = 9,
  VCNEF_ERR_CFL = 10,
  VCNEF_ERR_MISMATCH = 11,
  VCNEF_ERR_INTERNAL = 12
} vcnef_status;

typedef enum vcnef_mode { VCNEF_PARALLEL = 0, VCNEF_SEQUENTIAL = 1 } vcnef_mode;

typedef struct vcnef_config vcnef_config;
typedef struct vcnef_dataset vcnef_dataset;
typedef struct vcnef_model vcnef_model;

/* Receives one progress line per call, without a trailing newline. */
typedef void (*vcnef_log_fn)(const char* line, void* user);

VCNEF_API const char* vcnef_version(void);
VCNEF_API const char* vcnef_status_name(int status);
VCNEF_API const char* vcnef_last_error(void);

/* Config: strict JSON; unknown keys are rejected. */
VCNEF_API vcnef_status vcnef_config_default(vcnef_config** out);
VCNEF_API vcnef_status vcnef_config_load(const char* path, vcnef_config** out);
VCNEF_API vcnef_status vcnef_config_parse(const char* json, vcnef_config** out);
/* "section.key=value", e.g. "train.epochs=5". */
VCNEF_API vcnef_status vcnef_config_override(vcnef_config* cfg, const char* assignment);
/* Copies the canonical JSON (NUL-terminated) into buf when it fits; *needed
 * always receives the required size including the terminator. */
VCNEF_API vcnef_status vcnef_config_dump(const vcnef_config* cfg, char* buf, size_t cap, size_t* needed);
VCNEF_API vcnef_status vcnef_config_hash(const vcnef_config* cfg, char out[17]);
VCNEF_API void vcnef_config_free(vcnef_config* cfg);

typedef struct vcnef_dataset_info {
  size_t n_samples, nt, s, c;
  uint64_t seed;
} vcnef_dataset_info;

VCNEF_API vcnef_status vcnef_dataset_generate(const vcnef_config* cfg, vcnef_dataset** out);
VCNEF_API vcnef_status vcnef_dataset_read(const char* path, vcnef_dataset** out);
VCNEF_API vcnef_status vcnef_dataset_write(const vcnef_dataset* d, const char* path);
VCNEF_API vcnef_status vcnef_dataset_info_get(const vcnef_dataset* d, vcnef_dataset_info* out);
/* Trajectory `sample` as [nt, s, c] doubles; cap counts elements. */
VCNEF_API vcnef_status vcnef_dataset_values(const vcnef_dataset* d, size_t sample, double* out, size_t cap);
/* The nt frame times. */
VCNEF_API vcnef_status vcnef_dataset_times(const vcnef_dataset* d, double* out, size_t cap);
VCNEF_API void vcnef_dataset_free(vcnef_dataset* d);

/* Models hold f32 or f64 parameters as chosen by train.precision. */
VCNEF_API vcnef_status vcnef_model_init(const vcnef_config* cfg, vcnef_model** out);
VCNEF_API vcnef_status vcnef_model_load(const char* path, vcnef_model** out);
VCNEF_API vcnef_status vcnef_model_save(const vcnef_model* m, const char* path);
VCNEF_API vcnef_status vcnef_model_param_count(const vcnef_model* m, size_t* out);
/* Predicts trajectory `sample` of `d` from frame `start` at the given times
 * (relative to that frame). Writes n_times * s * c doubles. */
VCNEF_API vcnef_status vcnef_model_predict(const vcnef_model* m, const vcnef_dataset* d, size_t sample,
                                           size_t start, const double* times, size_t n_times, vcnef_mode mode,
                                           double* out, size_t cap);
VCNEF_API void vcnef_model_free(vcnef_model* m);

/* Workflows behind the command-line tool. `log` may be NULL. */
VCNEF_API vcnef_status vcnef_cmd_generate(const vcnef_config* cfg, const char* out_dir, vcnef_log_fn log,
                                          void* user);
/* stop_epoch > 0 ends the run after that many epochs, leaving a resumable
 * checkpoint. */
VCNEF_API vcnef_status vcnef_cmd_train(const vcnef_config* cfg, const char* dataset, const char* out_dir,
                                       int resume, size_t stop_epoch, vcnef_log_fn log, void* user);
VCNEF_API vcnef_status vcnef_cmd_eval(const vcnef_config* cfg, const char* checkpoint, const char* dataset,
                                      const char* out_dir, vcnef_log_fn log, void* user);
/* `dataset` may be NULL: a one-sample dataset is generated from cfg. */
VCNEF_API vcnef_status vcnef_cmd_bench(const vcnef_config* cfg, const char* checkpoint, const char* dataset,
                                       const char* out_dir, vcnef_log_fn log, void* user);

#ifdef __cplusplus
}
#endif

#endif
