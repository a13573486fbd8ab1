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

#include "vcnef/array.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <new>
#include <sstream>
#include <type_traits>
#include <unordered_map>

namespace vcnef {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kShape: return "shape mismatch";
    case ErrorCode::kNonFinite: return "non-finite value";
    case ErrorCode::kIo: return "i/o error";
    case ErrorCode::kBadMagic: return "bad magic";
    case ErrorCode::kTruncated: return "truncated payload";
    case ErrorCode::kMetadata: return "metadata mismatch";
    case ErrorCode::kVersion: return "version mismatch";
    case ErrorCode::kConfig: return "invalid config";
    case ErrorCode::kCfl: return "stability bound violated";
    case ErrorCode::kMismatch: return "output mismatch";
    case ErrorCode::kInternal: return "internal error";
  }
  return "unknown error";
}

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace memory {
namespace {
std::atomic<std::size_t> g_current{0};
std::atomic<std::size_t> g_peak{0};
}  // namespace

Stats stats() { return {g_current.load(), g_peak.load()}; }

void reset_peak() { g_peak.store(g_current.load()); }

void record_alloc(std::size_t bytes) {
  const std::size_t now = g_current.fetch_add(bytes) + bytes;
  std::size_t peak = g_peak.load();
  while (now > peak && !g_peak.compare_exchange_weak(peak, now)) {
  }
}

void record_free(std::size_t bytes) { g_current.fetch_sub(bytes); }

namespace {

// Large freed buffers are kept per thread and handed back for requests of the
// same size. Returning them to the allocator lets it unmap the pages, and
// faulting them in again on the next call dominated large attention passes.
constexpr std::size_t kPoolMinBytes = std::size_t{64} << 10;
constexpr std::size_t kPoolMaxBytes = std::size_t{256} << 20;

// Fixed alignment keeps SIMD reduction order independent of where a buffer
// lands, so results do not depend on allocation history.
constexpr std::align_val_t kAlign{64};

struct Pool {
  std::unordered_multimap<std::size_t, void*> blocks;
  std::size_t bytes = 0;
  ~Pool() {
    for (auto& [size, p] : blocks) ::operator delete(p, kAlign);
  }
};

Pool& pool() {
  thread_local Pool p;
  return p;
}

}  // namespace

void* acquire(std::size_t bytes) {
  if (bytes >= kPoolMinBytes) {
    auto& p = pool();
    auto it = p.blocks.find(bytes);
    if (it != p.blocks.end()) {
      void* out = it->second;
      p.blocks.erase(it);
      p.bytes -= bytes;
      return out;
    }
  }
  return ::operator new(bytes, kAlign);
}

void release(void* ptr, std::size_t bytes) noexcept {
  if (bytes >= kPoolMinBytes) {
    auto& p = pool();
    if (p.bytes + bytes <= kPoolMaxBytes) {
      try {
        p.blocks.emplace(bytes, ptr);
        p.bytes += bytes;
        return;
      } catch (...) {
      }
    }
  }
  ::operator delete(ptr, kAlign);
}

}  // namespace memory

namespace {
void check_extents(const Shape& shape) {
  for (auto e : shape) {
    if (e == 0) {
      throw Error(ErrorCode::kShape, "array extents must be positive, got " + shape_string(shape));
    }
  }
}
}  // namespace

template <typename T>
Array<T>::Array(Shape shape) : Array(std::move(shape), T{0}) {}

template <typename T>
Array<T>::Array(Shape shape, T fill) : shape_(std::move(shape)) {
  check_extents(shape_);
  data_ = std::make_shared<Storage>(numel(shape_), fill);
}

template <typename T>
Array<T>::Array(Shape shape, std::span<const T> values) : shape_(std::move(shape)) {
  check_extents(shape_);
  if (values.size() != numel(shape_)) {
    throw Error(ErrorCode::kShape, "array: " + std::to_string(values.size()) +
                                       " values do not fill shape " + shape_string(shape_));
  }
  data_ = std::make_shared<Storage>(values.begin(), values.end());
}

template <typename T>
Array<T>::Array(Shape shape, std::initializer_list<T> values)
    : Array(std::move(shape), std::span<const T>(values.begin(), values.size())) {}

template <typename T>
Array<T>::Array(Shape shape, Storage&& values) : shape_(std::move(shape)) {
  check_extents(shape_);
  if (values.size() != numel(shape_)) {
    throw Error(ErrorCode::kShape, "array: " + std::to_string(values.size()) +
                                       " values do not fill shape " + shape_string(shape_));
  }
  data_ = std::make_shared<Storage>(std::move(values));
}

template <typename T>
std::size_t Array<T>::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw Error(ErrorCode::kShape, "axis " + std::to_string(axis) + " out of range for " +
                                       shape_string(shape_));
  }
  return shape_[axis];
}

template <typename T>
std::span<T> Array<T>::mutable_data() {
  if (!data_) return {};
  if (data_.use_count() > 1) data_ = std::make_shared<Storage>(*data_);
  return std::span<T>(*data_);
}

template <typename T>
T Array<T>::at(std::initializer_list<std::size_t> index) const {
  if (index.size() != shape_.size()) {
    throw Error(ErrorCode::kShape, "index rank does not match " + shape_string(shape_));
  }
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (auto i : index) {
    if (i >= shape_[axis]) throw Error(ErrorCode::kShape, "index out of range");
    flat = flat * shape_[axis] + i;
    ++axis;
  }
  return (*data_)[flat];
}

template <typename T>
T Array<T>::item() const {
  if (size() != 1) {
    throw Error(ErrorCode::kShape, "item() needs exactly one element, shape is " +
                                       shape_string(shape_));
  }
  return (*data_)[0];
}

template <typename T>
Array<T> Array<T>::reshaped(Shape shape) const {
  check_extents(shape);
  if (numel(shape) != size()) {
    throw Error(ErrorCode::kShape,
                "reshape: " + shape_string(shape_) + " -> " + shape_string(shape));
  }
  Array out = *this;
  out.shape_ = std::move(shape);
  return out;
}

template <typename T>
bool Array<T>::all_finite() const {
  // Non-finite means an all-ones exponent; the integer test vectorizes.
  using Bits = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  constexpr Bits kExp = static_cast<Bits>(sizeof(T) == 4 ? 0x7f800000ull : 0x7ff0000000000000ull);
  Bits bad = 0;
  for (T v : data()) bad |= static_cast<Bits>((std::bit_cast<Bits>(v) & kExp) == kExp);
  return bad == 0;
}

template <typename T>
bool Array<T>::identical(const Array& other) const {
  if (shape_ != other.shape_ || size() != other.size()) return false;
  if (size() == 0) return true;
  return std::memcmp(data_->data(), other.data_->data(), size() * sizeof(T)) == 0;
}

template <typename T>
static double max_abs_diff_impl(const Array<T>& a, const Array<T>& b) {
  if (a.shape() != b.shape()) {
    throw Error(ErrorCode::kShape,
                "max_abs_diff: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  double m = 0.0;
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < x.size(); ++i) {
    m = std::max(m, std::abs(static_cast<double>(x[i]) - static_cast<double>(y[i])));
  }
  return m;
}

double max_abs_diff(const Array<double>& a, const Array<double>& b) {
  return max_abs_diff_impl(a, b);
}
double max_abs_diff(const Array<float>& a, const Array<float>& b) {
  return max_abs_diff_impl(a, b);
}

template class Array<float>;
template class Array<double>;

}  // namespace vcnef
