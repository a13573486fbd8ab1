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

#include <atomic>
#include <cstddef>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vcnef/error.hpp"

namespace vcnef {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_string(const Shape& shape);

// Process-wide accounting of array payload bytes. Every Array buffer is
// allocated through TrackedAllocator, so the peak below is the high-water
// mark of live tensor memory since the last reset.
namespace memory {

struct Stats {
  std::size_t current_bytes = 0;
  std::size_t peak_bytes = 0;
};

Stats stats();
/// Sets the peak to the current live byte count.
void reset_peak();
void record_alloc(std::size_t bytes);
void record_free(std::size_t bytes);
/// Raw storage for array buffers; large blocks are recycled per thread.
void* acquire(std::size_t bytes);
void release(void* p, std::size_t bytes) noexcept;

}  // namespace memory

template <typename T>
struct TrackedAllocator {
  using value_type = T;

  TrackedAllocator() noexcept = default;
  template <typename U>
  TrackedAllocator(const TrackedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    memory::record_alloc(n * sizeof(T));
    return static_cast<T*>(memory::acquire(n * sizeof(T)));
  }
  void deallocate(T* p, std::size_t n) noexcept {
    memory::record_free(n * sizeof(T));
    memory::release(p, n * sizeof(T));
  }

  // Sized construction leaves elements uninitialized; every producer writes
  // its whole buffer, and Array(Shape) fills explicitly.
  template <typename U>
  void construct(U* p) noexcept {
    ::new (static_cast<void*>(p)) U;
  }
  template <typename U, typename... Args>
  void construct(U* p, Args&&... args) {
    ::new (static_cast<void*>(p)) U(std::forward<Args>(args)...);
  }

  template <typename U>
  bool operator==(const TrackedAllocator<U>&) const noexcept {
    return true;
  }
};

/// Dense row-major N-dimensional array with value semantics.
///
/// Storage is shared between copies and never mutated through a shared
/// handle: `mutable_data()` detaches first. A rank-0 shape `{}` holds one
/// element.
template <typename T>
class Array {
 public:
  using value_type = T;
  using Storage = std::vector<T, TrackedAllocator<T>>;

  Array() = default;
  explicit Array(Shape shape);
  Array(Shape shape, T fill);
  Array(Shape shape, std::span<const T> values);
  Array(Shape shape, std::initializer_list<T> values);
  Array(Shape shape, Storage&& values);

  static Array scalar(T value) { return Array(Shape{}, value); }

  bool empty() const noexcept { return data_ == nullptr; }
  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_ ? data_->size() : 0; }
  std::size_t dim(std::size_t axis) const;

  std::span<const T> data() const noexcept {
    return data_ ? std::span<const T>(*data_) : std::span<const T>();
  }
  std::span<T> mutable_data();

  T operator[](std::size_t i) const { return (*data_)[i]; }
  T at(std::initializer_list<std::size_t> index) const;
  T item() const;

  /// Same storage, new shape with equal element count.
  Array reshaped(Shape shape) const;

  template <typename U>
  Array<U> cast() const {
    typename Array<U>::Storage out(size());
    auto src = data();
    for (std::size_t i = 0; i < src.size(); ++i) out[i] = static_cast<U>(src[i]);
    return Array<U>(shape_, std::move(out));
  }

  bool all_finite() const;
  bool identical(const Array& other) const;

 private:
  Shape shape_;
  std::shared_ptr<Storage> data_;
};

double max_abs_diff(const Array<double>& a, const Array<double>& b);
double max_abs_diff(const Array<float>& a, const Array<float>& b);

extern template class Array<float>;
extern template class Array<double>;

}  // namespace vcnef
