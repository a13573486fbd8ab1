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

// Little-endian stream helpers shared by the dataset and checkpoint formats.

#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <type_traits>
#include <vector>

#include "vcnef/error.hpp"

namespace vcnef {

namespace detail {
template <typename T>
T byteswap_if_big(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    std::reverse(b, b + sizeof(T));
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}
}  // namespace detail

template <typename T>
void write_le(std::ostream& out, T v) {
  static_assert(std::is_arithmetic_v<T>);
  v = detail::byteswap_if_big(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
  static_assert(std::is_arithmetic_v<T>);
  T v;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw Error(ErrorCode::kTruncated, "truncated file: unexpected end of stream");
  }
  return detail::byteswap_if_big(v);
}

template <typename T>
void write_le_span(std::ostream& out, std::span<const T> values) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size_bytes()));
  } else {
    for (T v : values) write_le(out, v);
  }
}

template <typename T>
void read_le_span(std::istream& in, std::span<T> values) {
  if (!in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size_bytes()))) {
    throw Error(ErrorCode::kTruncated, "truncated payload: unexpected end of stream");
  }
  if constexpr (std::endian::native == std::endian::big) {
    for (T& v : values) v = detail::byteswap_if_big(v);
  }
}

inline void write_le_floats(std::ostream& out, const std::vector<float>& v) {
  write_le_span<float>(out, v);
}
inline void read_le_floats(std::istream& in, std::vector<float>& v) { read_le_span<float>(in, v); }

}  // namespace vcnef
