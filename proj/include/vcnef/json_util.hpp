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

#pragma once

#include <algorithm>
#include <initializer_list>
#include <json.hpp>
#include <string>
#include <string_view>
#include <type_traits>

#include "vcnef/error.hpp"

namespace vcnef {

/// Throws kConfig naming every key of `j` outside `allowed`.
inline void require_known_keys(const nlohmann::json& j, std::initializer_list<std::string_view> allowed,
                               const std::string& where) {
  if (!j.is_object()) throw Error(ErrorCode::kConfig, where + ": expected a JSON object");
  std::string unknown;
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      unknown += (unknown.empty() ? "" : ", ") + key;
    }
  }
  if (!unknown.empty()) throw Error(ErrorCode::kConfig, where + ": unknown keys: " + unknown);
}

/// Reads j[key] into out when present, reporting type errors as kConfig.
template <typename V>
void read_opt(const nlohmann::json& j, const char* key, V& out, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) return;
  if constexpr (std::is_unsigned_v<V> && !std::is_same_v<V, bool>) {
    if (!it->is_number_integer() || (!it->is_number_unsigned() && it->template get<long long>() < 0)) throw Error(ErrorCode::kConfig, where + "." + key + ": expected a non-negative integer");
  }
  try {
    out = it->template get<V>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfig, where + "." + key + ": " + e.what());
  }
}

}  // namespace vcnef
