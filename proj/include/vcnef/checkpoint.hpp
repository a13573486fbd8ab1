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

// VCNP checkpoint container:
//   "VCNP" | u32 version | u64 metadata length | JSON metadata |
//   per array: u32 name length | name | u64 rank | u64 extents... | payload
// Payload elements are little-endian float32 or float64 as declared by the
// metadata "dtype" field.

#pragma once

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <string>

#include "vcnef/autodiff.hpp"
#include "vcnef/model.hpp"

namespace vcnef {

inline constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
struct CheckpointData {
  nlohmann::json meta;
  ParamMap<T> arrays;
};

/// Writes `arrays` in their own precision; meta gains "dtype" and "arrays".
template <typename T>
void write_checkpoint(const std::filesystem::path& path, nlohmann::json meta, const ParamMap<T>& arrays);

/// Reads any checkpoint, converting the payload to T.
template <typename T>
CheckpointData<T> read_checkpoint(const std::filesystem::path& path);

nlohmann::json model_config_to_json(const ModelConfig& cfg);
/// Strict: unknown keys raise kConfig listing them. Missing keys keep defaults.
ModelConfig model_config_from_json(const nlohmann::json& j);

/// Model-only checkpoint: parameters under "param/<name>".
template <typename T>
void save_model(const std::filesystem::path& path, const ParameterStore<T>& store,
                const nlohmann::json& extra = nlohmann::json::object());
template <typename T>
ParameterStore<T> load_model(const std::filesystem::path& path, nlohmann::json* meta = nullptr);

/// Parameters stored as "param/<name>" in an already-read checkpoint.
template <typename T>
ParameterStore<T> store_from_checkpoint(const CheckpointData<T>& ck);

}  // namespace vcnef
