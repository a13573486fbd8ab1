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

#include "vcnef/autodiff.hpp"

#include <Eigen/Core>
#include <unsupported/Eigen/SpecialFunctions>
#include <cmath>
#include <numeric>

namespace vcnef {

namespace {

template <typename T>
using Storage = typename Array<T>::Storage;

[[noreturn]] void shape_error(const std::string& op, const Shape& a, const Shape& b) {
  throw Error(ErrorCode::kShape, op + ": incompatible shapes " + shape_string(a) + " and " +
                                     shape_string(b));
}

[[noreturn]] void shape_error(const std::string& op, const Shape& a, const std::string& why) {
  throw Error(ErrorCode::kShape, op + ": " + why + " (shape " + shape_string(a) + ")");
}

template <typename T>
void check_finite(const std::string& op, const Array<T>& out) {
  if (!out.all_finite()) {
    throw Error(ErrorCode::kNonFinite,
                "non-finite value produced by " + op + " with output shape " +
                    shape_string(out.shape()));
  }
}

template <typename T>
void accumulate(Array<T>& dst, Array<T>&& src) {
  if (dst.empty()) {
    dst = std::move(src);
    return;
  }
  auto d = dst.mutable_data();
  auto s = src.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

// Row-major strides for `shape`.
std::vector<std::size_t> strides_of(const Shape& shape) {
  std::vector<std::size_t> st(shape.size(), 1);
  for (std::size_t i = shape.size(); i-- > 1;) st[i - 1] = st[i] * shape[i];
  return st;
}

template <typename T>
using MatC = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename T>
using MatM = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

// ---------------------------------------------------------------------------
// Elementwise binary

enum class BinaryKind { kAdd, kSub, kMul, kDiv };

// Operand pair where either side may be a broadcast scalar.
template <typename T>
struct Operands {
  std::span<const T> x;
  bool x_scalar;
  std::span<const T> y;
  bool y_scalar;

  T u(std::size_t i) const { return x_scalar ? x[0] : x[i]; }
  T v(std::size_t i) const { return y_scalar ? y[0] : y[i]; }

  template <typename F>
  void map(T* out, std::size_t n, F f) const {
    if (x_scalar) {
      for (std::size_t i = 0; i < n; ++i) out[i] = f(x[0], y[i]);
    } else if (y_scalar) {
      for (std::size_t i = 0; i < n; ++i) out[i] = f(x[i], y[0]);
    } else {
      for (std::size_t i = 0; i < n; ++i) out[i] = f(x[i], y[i]);
    }
  }
};

template <typename T>
class BinaryOp final : public Primitive<T> {
 public:
  explicit BinaryOp(BinaryKind kind) : kind_(kind) {}

  std::string name() const override {
    switch (kind_) {
      case BinaryKind::kAdd: return "add";
      case BinaryKind::kSub: return "sub";
      case BinaryKind::kMul: return "hadamard";
      case BinaryKind::kDiv: return "div";
    }
    return "binary";
  }

  Array<T> forward(std::span<const Array<T>> in) const override {
    const auto& a = in[0];
    const auto& b = in[1];
    const bool a_scalar = a.size() == 1 && b.size() != 1;
    const bool b_scalar = b.size() == 1 && a.size() != 1;
    if (!a_scalar && !b_scalar && a.shape() != b.shape()) {
      if (!(a.size() == 1 && b.size() == 1)) shape_error(name(), a.shape(), b.shape());
    }
    const Shape& out_shape = a_scalar ? b.shape() : a.shape();
    Storage<T> out(numel(out_shape));
    const Operands<T> ops{a.data(), a_scalar, b.data(), b_scalar};
    switch (kind_) {
      case BinaryKind::kAdd: ops.map(out.data(), out.size(), [](T u, T v) { return u + v; }); break;
      case BinaryKind::kSub: ops.map(out.data(), out.size(), [](T u, T v) { return u - v; }); break;
      case BinaryKind::kMul: ops.map(out.data(), out.size(), [](T u, T v) { return u * v; }); break;
      case BinaryKind::kDiv: ops.map(out.data(), out.size(), [](T u, T v) { return u / v; }); break;
    }
    return Array<T>(out_shape, std::move(out));
  }

  void backward(std::span<const Array<T>> in, const Array<T>& out, const Array<T>& g,
                std::span<const bool> needs, std::span<Array<T>> grads) const override {
    const auto& a = in[0];
    const auto& b = in[1];
    const bool a_scalar = a.size() == 1 && b.size() != 1;
    const bool b_scalar = b.size() == 1 && a.size() != 1;
    const Operands<T> ops{a.data(), a_scalar, b.data(), b_scalar};
    auto gd = g.data();
    const std::size_t n = out.size();
    auto grad = [&](bool reduce, std::size_t size, auto f) {
      Storage<T> dst(size);
      if (reduce) {
        T acc = 0;
        for (std::size_t i = 0; i < n; ++i) acc += f(gd[i], ops.u(i), ops.v(i));
        dst[0] = acc;
      } else {
        for (std::size_t i = 0; i < n; ++i) dst[i] = f(gd[i], ops.u(i), ops.v(i));
      }
      return dst;
    };
    if (needs[0]) {
      Storage<T> ga;
      switch (kind_) {
        case BinaryKind::kAdd:
        case BinaryKind::kSub: ga = grad(a_scalar, a.size(), [](T gi, T, T) { return gi; }); break;
        case BinaryKind::kMul: ga = grad(a_scalar, a.size(), [](T gi, T, T v) { return gi * v; }); break;
        case BinaryKind::kDiv: ga = grad(a_scalar, a.size(), [](T gi, T, T v) { return gi / v; }); break;
      }
      grads[0] = Array<T>(a.shape(), std::move(ga));
    }
    if (needs[1]) {
      Storage<T> gb;
      switch (kind_) {
        case BinaryKind::kAdd: gb = grad(b_scalar, b.size(), [](T gi, T, T) { return gi; }); break;
        case BinaryKind::kSub: gb = grad(b_scalar, b.size(), [](T gi, T, T) { return -gi; }); break;
        case BinaryKind::kMul: gb = grad(b_scalar, b.size(), [](T gi, T u, T) { return gi * u; }); break;
        case BinaryKind::kDiv: gb = grad(b_scalar, b.size(), [](T gi, T u, T v) { return -gi * u / (v * v); }); break;
      }
      grads[1] = Array<T>(b.shape(), std::move(gb));
    }
  }

 private:
  BinaryKind kind_;
};

// ---------------------------------------------------------------------------
// Elementwise unary. Fn provides f(x) and df(x, y) with y = f(x).

template <typename T, typename Fn>
class UnaryOp final : public Primitive<T> {
 public:
  explicit UnaryOp(Fn fn = {}) : fn_(fn) {}
  std::string name() const override { return Fn::kName; }

  Array<T> forward(std::span<const Array<T>> in) const override {
    auto x = in[0].data();
    Storage<T> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = fn_.f(x[i]);
    return Array<T>(in[0].shape(), std::move(out));
  }

  void backward(std::span<const Array<T>> in, const Array<T>& out, const Array<T>& g,
                std::span<const bool> needs, std::span<Array<T>> grads) const override {
    if (!needs[0]) return;
    auto x = in[0].data();
    auto y = out.data();
    auto gd = g.data();
    Storage<T> ga(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) ga[i] = gd[i] * fn_.df(x[i], y[i]);
    grads[0] = Array<T>(in[0].shape(), std::move(ga));
  }

 private:
  Fn fn_;
};

template <typename T>
struct AddScalarFn {
  static constexpr const char* kName = "add_scalar";
  T c;
  T f(T x) const { return x + c; }
  T df(T, T) const { return T{1}; }
};

template <typename T>
struct MulScalarFn {
  static constexpr const char* kName = "mul_scalar";
  T c;
  T f(T x) const { return x * c; }
  T df(T, T) const { return c; }
};

template <typename T>
struct SquareFn {
  static constexpr const char* kName = "square";
  T f(T x) const { return x * x; }
  T df(T x, T) const { return T{2} * x; }
};

template <typename T>
struct ExpFn {
  static constexpr const char* kName = "exp";
  T f(T x) const { return std::exp(x); }
  T df(T, T y) const { return y; }
};

template <typename T>
struct SinFn {
  static constexpr const char* kName = "sin";
  T f(T x) const { return std::sin(x); }
  T df(T x, T) const { return std::cos(x); }
};

template <typename T>
struct CosFn {
  static constexpr const char* kName = "cos";
  T f(T x) const { return std::cos(x); }
  T df(T x, T) const { return -std::sin(x); }
};

template <typename T>
struct EluFn {
  static constexpr const char* kName = "elu";
  T f(T x) const { return x > T{0} ? x : std::expm1(x); }
  T df(T x, T y) const { return x > T{0} ? T{1} : y + T{1}; }
};

template <typename T>
using VecC = Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>>;
template <typename T>
using VecM = Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>>;

template <typename T>
VecC<T> vec(const Array<T>& a) {
  return VecC<T>(a.data().data(), static_cast<Eigen::Index>(a.size()));
}

// Activations below run through Eigen's packet math.
template <typename T>
class EluPlusOneOp final : public Primitive<T> {
 public:
  std::string name() const override { return "elu_plus_one"; }

  Array<T> forward(std::span<const Array<T>> in) const override {
    const auto x = vec(in[0]);
    Storage<T> out(in[0].size());
    VecM<T>(out.data(), x.size()) = (x > T{0}).select(x + T{1}, x.exp());
    return Array<T>(in[0].shape(), std::move(out));
  }

  void backward(std::span<const Array<T>> in, const Array<T>& out, const Array<T>& g,
                std::span<const bool> needs, std::span<Array<T>> grads) const override {
    if (!needs[0]) return;
    const auto x = vec(in[0]);
    Storage<T> ga(in[0].size());
    VecM<T>(ga.data(), x.size()) = vec(g) * (x > T{0}).select(T{1}, vec(out));
    grads[0] = Array<T>(in[0].shape(), std::move(ga));
  }
};

template <typename T>
class GeluOp final : public Primitive<T> {
 public:
  std::string name() const override { return "gelu"; }

  Array<T> forward(std::span<const Array<T>> in) const override {
    const auto x = vec(in[0]);
    Storage<T> out(in[0].size());
    VecM<T>(out.data(), x.size()) = T{0.5} * x * (T{1} + (x * kInvSqrt2).erf());
    return Array<T>(in[0].shape(), std::move(out));
  }

  void backward(std::span<const Array<T>> in, const Array<T>&, const Array<T>& g,
                std::span<const bool> needs, std::span<Array<T>> grads) const override {
    if (!needs[0]) return;
    const auto x = vec(in[0]);
    Storage<T> ga(in[0].size());
    VecM<T>(ga.data(), x.size()) =
        vec(g) * (T{0.5} * (T{1} + (x * kInvSqrt2).erf()) + x * kInvSqrt2Pi * (T{-0.5} * x * x).exp());
    grads[0] = Array<T>(in[0].shape(), std::move(ga));
  }

 private:
  static constexpr T kInvSqrt2 = static_cast<T>(0.70710678118654752440);
  static constexpr T kInvSqrt2Pi = static_cast<T>(0.39894228040143267794);
};

// ---------------------------------------------------------------------------
// Linear algebra and layout

template <typename T>
class MatmulOp final : public Primitive<T> {
 public:
  std::string name() const override { return "matmul"; }

  Array<T> forward(std::span<const Array<T>> in) const override {
    const auto& a = in[0];
    const auto& b = in[1];
    const auto [batch, m, k, n] = dims(a, b);
    Shape out_shape = a.rank() == 2 ? Shape{m, n} : Shape{batch, m, n};
    Storage<T> out(batch * m * n);
    for (std::size_t i = 0; i < batch; ++i) {
      MatC<T> A(a.data().data() + i * m * k, m, k);
      MatC<T> B(b.data().data() + i * k * n, k, n);
      MatM<T> C(out.data() + i * m * n, m, n);
      C.noalias() = A * B;
    }
    return Array<T>(out_shape, std::move(out));
  }

  void backward(std::span<const Array<T>> in, const Array<T>&, const Array<T>& g,
                std::span<const bool> needs, std::span<Array<T>> grads) const override {
    const auto& a = in[0];
    const auto& b = in[1];
    const auto [batch, m, k, n] = dims(a, b);
    if (needs[0]) {
      Storage<T> ga(a.size());
      for (std::size_t i = 0; i < batch; ++i) {
        MatC<T> G(g.data().data() + i * m * n, m, n);
        MatC<T> B(b.data().data() + i * k * n, k, n);
        MatM<T> GA(ga.data() + i * m * k, m, k);
        GA.noalias() = G * B.transpose();
      }
      grads[0] = Array<T>(a.shape(), std::move(ga));
    }
    if (needs[1]) {
      Storage<T> gb(b.size());
      for (std::size_t i = 0; i < batch; ++i) {
        MatC<T> G(g.data().data() + i * m * n, m, n);
        MatC<T> A(a.data().data() + i * m * k, m, k);
        MatM<T> GB(gb.data() + i * k * n, k, n);
        GB.noalias() = A.transpose() * G;
      }
      grads[1] = Array<T>(b.shape(), std::move(gb));
    }
  }

 private:
  struct Dims {
    std::size_t batch, m, k, n;
  };
  Dims dims(const Array<T>& a, const Array<T>& b) const {
    if (a.rank() == 2 && b.rank() == 2) {
      if (a.dim(1) != b.dim(0)) shape_error("matmul", a.shape(), b.shape());
      return {1, a.dim(0), a.dim(1), b.dim(1)};
    }
    if (a.rank() == 3 && b.rank() == 3) {
      if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(1)) shape_error("matmul", a.shape(), b.shape());
      return {a.dim(0), a.dim(1), a.dim(2), b.dim(2)};
    }
    shape_error("matmul", a.shape(), b.shape());
  }
};

template <typename T>
Array<T> permute_array(const Array<T>& a, const std::vector<std::size_t>& axes) {
  const Shape& in = a.shape();
  const std::size_t r = in.size();
  if (r < 2) return a;
  const auto in_strides = strides_of(in);
  Shape out_shape(r);
  std::vector<std::size_t> src_stride(r);
  for (std::size_t i = 0; i < r; ++i) {
    out_shape[i] = in[axes[i]];
    src_stride[i] = in_strides[axes[i]];
  }
  Storage<T> out(a.size());
  auto src = a.data();
  std::vector<std::size_t> idx(r, 0);
  std::size_t offset = 0;
  const std::size_t inner = r ? out_shape[r - 1] : 1;
  const std::size_t inner_stride = r ? src_stride[r - 1] : 0;
  for (std::size_t o = 0; o < out.size(); o += inner) {
    for (std::size_t j = 0; j < inner; ++j) out[o + j] = src[offset + j * inner_stride];
    // advance the multi-index over all but the innermost axis
    for (std::size_t ax = r - 1; ax-- > 0;) {
      ++idx[ax];
      offset += src_stride[ax];
      if (idx[ax] < out_shape[ax]) break;
      offset -= src_stride[ax] * out_shape[ax];
      idx[ax] = 0;
    }
  }
  return Array<T>(out_shape, std::move(out));
}

template <typename T>
class PermuteOp final : public Primitive<T> {
 public:
  explicit PermuteOp(std::vector<std::size_t> axes) : axes_(std::move(axes)) {}
  std::string name() const override { return "permute"; }

  Array<T> forward(std::span<const Array<T>> in) const override {
    const auto& a = in[0];
    if (axes_.size() != a.rank()) shape_error(name(), a.shape(), "axis count does not match rank");
    std::vector<bool> seen(axes_.size(), false);
    for (auto ax : axes_) {
      if (ax >= axes_.size() || seen[ax]) shape_error(name(), a.shape(), "axes are not a permutation");
      seen[ax] = true;
    }
    return permute_array(a, axes_);
  }

  void backward(std::span<const Array<T>>, const Array<T>&, const Array<T>& g,
                std::span<const bool> needs, std::span<Array<T>> grads) const override {
    if (!needs[0]) return;
    std::vector<std::size_t> inverse(axes_.size());
    for (std::size_t i = 0; i < axes_.size(); ++i) inverse[axes_[i]] = i;
    grads[0] = permute_array(g, inverse);
  }

 private:
  std::vector<std::size_t> axes_;
};

template <typename T>
class ReshapeOp final : public Primitive<T> {
 public:
  explicit ReshapeOp(Shape shape) : shape_(std::move(shape)) {}
  std::string name() const override { return "reshape"; }
  Array<T> forward(std::span<const Array<T>> in) const override {
    if (numel(shape_) != in[0].size()) shape_error(name(), in[0].shape(), shape_);
    return in[0].reshaped(shape_);
  }
  void backward(std::span<const Array<T>> in, const Array<T>&, const Array<T>& g,
                std::span<const bool> needs, std::span<Array<T>> grads) const override {
    if (needs[0]) grads[0] = g.reshaped(in[0].shape());
  }

 private:
  Shape shape_;
};

// Splits a shape around `axis` into (outer, extent, inner).
struct AxisSplit {
  std::size_t outer = 1, extent = 1, inner = 1;
};
AxisSplit split_at(const Shape& s, std::size_t axis) {
  AxisSplit out;
  for (std::size_t i = 0; i < axis; ++i) out.outer *= s[i];
  out.extent = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) out.inner *= s[i];
  return out;
}

template <typename T>
class ConcatOp final : public Primitive<T> {
 public:
  explicit ConcatOp(std::size_t axis) : axis_(axis) {}
  std::string name() const override { return "concat"; }

  Array<T> forward(std::span<const Array<T>> in) const override {
    if (in.empty()) throw Error(ErrorCode::kShape, "concat: no inputs");
    Shape out_shape = in[0].shape();
    if (axis_ >= out_shape.size()) shape_error(name(), out_shape, "axis out of range");
    out_shape[axis_] = 0;
    for (const auto& p : in) {
      if (p.rank() != in[0].rank()) shape_error(name(), in[0].shape(), p.shape());
      for (std::size_t i = 0; i < p.rank(); ++i) {
        if (i != axis_ && p.shape()[i] != in[0].shape()[i]) shape_error(name(), in[0].shape(), p.shape());
      }
      out_shape[axis_] += p.shape()[axis_];
    }
    const auto outer = split_at(out_shape, axis_).outer;
    const auto inner = split_at(out_shape, axis_).inner;
    const std::size_t row = out_shape[axis_] * inner;
    Storage<T> out(numel(out_shape));
    std::size_t col = 0;
    for (const auto& p : in) {
      const std::size_t w = p.shape()[axis_] * inner;
      auto src = p.data();
      for (std::size_t o = 0; o < outer; ++o) {
        std::copy_n(src.data() + o * w, w, out.data() + o * row + col);
      }
      col += w;
    }
    return Array<T>(out_shape, std::move(out));
  }

  void backward(std::span<const Array<T>> in, const Array<T>& out, const Array<T>& g,
                std::span<const bool> needs, std::span<Array<T>> grads) const override {
    const auto sp = split_at(out.shape(), axis_);
    const std::size_t row = sp.extent * sp.inner;
    std::size_t col = 0;
    auto gd = g.data();
    for (std::size_t k = 0; k < in.size(); ++k) {
      const std::size_t w = in[k].shape()[axis_] * sp.inner;
      if (needs[k]) {
        Storage<T> part(in[k].size());
        for (std::size_t o = 0; o < sp.outer; ++o) {
          std::copy_n(gd.data() + o * row + col, w, part.data() + o * w);
        }
        grads[k] = Array<T>(in[k].shape(), std::move(part));
      }
      col += w;
    }
  }

 private:
  std::size_t axis_;
};

template <typename T>
class SliceOp final : public Primitive<T> {
 public:
  SliceOp(std::size_t axis, std::size_t begin, std::size_t end)
      : axis_(axis), begin_(begin), end_(end) {}
  std::string name() const override { return "slice"; }

  Array<T> forward(std::span<const Array<T>> in) const override {
    const auto& a = in[0];
    if (axis_ >= a.rank() || begin_ >= end_ || end_ > a.shape()[axis_]) {
      shape_error(name(), a.shape(),
                  "range [" + std::to_string(begin_) + ", " + std::to_string(end_) +
                      ") on axis " + std::to_string(axis_) + " is invalid");
    }
    const auto sp = split_at(a.shape(), axis_);
    Shape out_shape = a.shape();
    out_shape[axis_] = end_ - begin_;
    const std::size_t w = (end_ - begin_) * sp.inner;
    const std::size_t row = sp.extent * sp.inner;
    Storage<T> out(sp.outer * w);
    auto src = a.data();
    for (std::size_t o = 0; o < sp.outer; ++o) {
      std::copy_n(src.data() + o * row + begin_ * sp.inner, w, out.data() + o * w);
    }
    return Array<T>(out_shape, std::move(out));
  }

  void backward(std::span<const Array<T>> in, const Array<T>&, const Array<T>& g,
                std::span<const bool> needs, std::span<Array<T>> grads) const override {
    if (!needs[0]) return;
    const auto sp = split_at(in[0].shape(), axis_);
    const std::size_t w = (end_ - begin_) * sp.inner;
    const std::size_t row = sp.extent * sp.inner;
    Storage<T> ga(in[0].size(), T{0});
    auto gd = g.data();
    for (std::size_t o = 0; o < sp.outer; ++o) {
      std::copy_n(gd.data() + o * w, w, ga.data() + o * row + begin_ * sp.inner);
    }
    grads[0] = Array<T>(in[0].shape(), std::move(ga));
  }

 private:
  std::size_t axis_, begin_, end_;
};

template <typename T>
class RepeatOp final : public Primitive<T> {
 public:
  explicit RepeatOp(std::size_t n) : n_(n) {}
  std::string name() const override { return "repeat"; }

  Array<T> forward(std::span<const Array<T>> in) const override {
    if (n_ == 0) shape_error(name(), in[0].shape(), "repeat count must be positive");
    Shape out_shape{n_};
    out_shape.insert(out_shape.end(), in[0].shape().begin(), in[0].shape().end());
    const std::size_t w = in[0].size();
    Storage<T> out(n_ * w);
    for (std::size_t i = 0; i < n_; ++i) std::copy_n(in[0].data().data(), w, out.data() + i * w);
    return Array<T>(out_shape, std::move(out));
  }

  void backward(std::span<const Array<T>> in, const Array<T>&, const Array<T>& g,
                std::span<const bool> needs, std::span<Array<T>> grads) const override {
    if (!needs[0]) return;
    const std::size_t w = in[0].size();
    Storage<T> ga(w, T{0});
    auto gd = g.data();
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < w; ++j) ga[j] += gd[i * w + j];
    grads[0] = Array<T>(in[0].shape(), std::move(ga));
  }

 private:
  std::size_t n_;
};

template <typename T>
class TransposeOp final : public Primitive<T> {
 public:
  std::string name() const override { return "transpose"; }
  Array<T> forward(std::span<const Array<T>> in) const override {
    const auto& a = in[0];
    if (a.rank() < 2) shape_error(name(), a.shape(), "needs rank >= 2");
    return permute_array(a, axes(a.rank()));
  }
  void backward(std::span<const Array<T>> in, const Array<T>&, const Array<T>& g,
                std::span<const bool> needs, std::span<Array<T>> grads) const override {
    if (needs[0]) grads[0] = permute_array(g, axes(in[0].rank()));
  }

 private:
  static std::vector<std::size_t> axes(std::size_t r) {
    std::vector<std::size_t> ax(r);
    std::iota(ax.begin(), ax.end(), 0);
    std::swap(ax[r - 1], ax[r - 2]);
    return ax;
  }
};

// ---------------------------------------------------------------------------
// Row-wise ops

enum class RowKind { kAdd, kMul };

template <typename T>
class RowwiseOp final : public Primitive<T> {
 public:
  explicit RowwiseOp(RowKind kind) : kind_(kind) {}
  std::string name() const override { return kind_ == RowKind::kAdd ? "add_rowwise" : "mul_rowwise"; }

  Array<T> forward(std::span<const Array<T>> in) const override {
    const auto& a = in[0];
    const auto& v = in[1];
    if (a.rank() < 1 || v.rank() != 1 || v.dim(0) != a.shape().back()) {
      shape_error(name(), a.shape(), v.shape());
    }
    const std::size_t k = v.size();
    Storage<T> out(a.size());
    auto x = a.data();
    auto w = v.data();
    if (kind_ == RowKind::kAdd) {
      for (std::size_t i = 0; i < out.size(); i += k)
        for (std::size_t j = 0; j < k; ++j) out[i + j] = x[i + j] + w[j];
    } else {
      for (std::size_t i = 0; i < out.size(); i += k)
        for (std::size_t j = 0; j < k; ++j) out[i + j] = x[i + j] * w[j];
    }
    return Array<T>(a.shape(), std::move(out));
  }

  void backward(std::span<const Array<T>> in, const Array<T>&, const Array<T>& g,
                std::span<const bool> needs, std::span<Array<T>> grads) const override {
    const auto& a = in[0];
    const auto& v = in[1];
    const std::size_t k = v.size();
    auto gd = g.data();
    auto x = a.data();
    auto w = v.data();
    if (needs[0]) {
      if (kind_ == RowKind::kAdd) {
        grads[0] = g;
      } else {
        Storage<T> ga(a.size());
        for (std::size_t i = 0; i < ga.size(); i += k)
          for (std::size_t j = 0; j < k; ++j) ga[i + j] = gd[i + j] * w[j];
        grads[0] = Array<T>(a.shape(), std::move(ga));
      }
    }
    if (needs[1]) {
      Storage<T> gv(k, T{0});
      if (kind_ == RowKind::kAdd) {
        for (std::size_t i = 0; i < a.size(); i += k)
          for (std::size_t j = 0; j < k; ++j) gv[j] += gd[i + j];
      } else {
        for (std::size_t i = 0; i < a.size(); i += k)
          for (std::size_t j = 0; j < k; ++j) gv[j] += gd[i + j] * x[i + j];
      }
      grads[1] = Array<T>(v.shape(), std::move(gv));
    }
  }

 private:
  RowKind kind_;
};

template <typename T>
class DivRowsOp final : public Primitive<T> {
 public:
  std::string name() const override { return "div_rows"; }

  Array<T> forward(std::span<const Array<T>> in) const override {
    const auto& a = in[0];
    const auto& b = in[1];
    check(a, b);
    const std::size_t k = a.shape().back();
    Storage<T> out(a.size());
    auto x = a.data();
    auto y = b.data();
    for (std::size_t r = 0; r < b.size(); ++r)
      for (std::size_t j = 0; j < k; ++j) out[r * k + j] = x[r * k + j] / y[r];
    return Array<T>(a.shape(), std::move(out));
  }

  void backward(std::span<const Array<T>> in, const Array<T>&, const Array<T>& g,
                std::span<const bool> needs, std::span<Array<T>> grads) const override {
    const auto& a = in[0];
    const auto& b = in[1];
    const std::size_t k = a.shape().back();
    auto x = a.data();
    auto y = b.data();
    auto gd = g.data();
    if (needs[0]) {
      Storage<T> ga(a.size());
      for (std::size_t r = 0; r < b.size(); ++r)
        for (std::size_t j = 0; j < k; ++j) ga[r * k + j] = gd[r * k + j] / y[r];
      grads[0] = Array<T>(a.shape(), std::move(ga));
    }
    if (needs[1]) {
      Storage<T> gb(b.size(), T{0});
      for (std::size_t r = 0; r < b.size(); ++r) {
        T acc = 0;
        for (std::size_t j = 0; j < k; ++j) acc += gd[r * k + j] * x[r * k + j];
        gb[r] = -acc / (y[r] * y[r]);
      }
      grads[1] = Array<T>(b.shape(), std::move(gb));
    }
  }

 private:
  void check(const Array<T>& a, const Array<T>& b) const {
    if (a.rank() != b.rank() || a.rank() < 1 || b.shape().back() != 1) {
      shape_error(name(), a.shape(), b.shape());
    }
    for (std::size_t i = 0; i + 1 < a.rank(); ++i) {
      if (a.shape()[i] != b.shape()[i]) shape_error(name(), a.shape(), b.shape());
    }
  }
};

// ---------------------------------------------------------------------------
// Reductions

template <typename T>
class SumOp final : public Primitive<T> {
 public:
  explicit SumOp(bool mean) : mean_(mean) {}
  std::string name() const override { return mean_ ? "mean" : "sum"; }
  Array<T> forward(std::span<const Array<T>> in) const override {
    T acc = 0;
    for (T v : in[0].data()) acc += v;
    if (mean_) acc /= static_cast<T>(in[0].size());
    return Array<T>::scalar(acc);
  }
  void backward(std::span<const Array<T>> in, const Array<T>&, const Array<T>& g,
                std::span<const bool> needs, std::span<Array<T>> grads) const override {
    if (!needs[0]) return;
    T v = g.item();
    if (mean_) v /= static_cast<T>(in[0].size());
    grads[0] = Array<T>(in[0].shape(), v);
  }

 private:
  bool mean_;
};

template <typename T>
class SumAxisOp final : public Primitive<T> {
 public:
  explicit SumAxisOp(std::size_t axis) : axis_(axis) {}
  std::string name() const override { return "sum_axis"; }

  Array<T> forward(std::span<const Array<T>> in) const override {
    const auto& a = in[0];
    if (axis_ >= a.rank()) shape_error(name(), a.shape(), "axis out of range");
    const auto sp = split_at(a.shape(), axis_);
    Shape out_shape = a.shape();
    out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis_));
    Storage<T> out(sp.outer * sp.inner, T{0});
    auto x = a.data();
    for (std::size_t o = 0; o < sp.outer; ++o)
      for (std::size_t e = 0; e < sp.extent; ++e)
        for (std::size_t i = 0; i < sp.inner; ++i)
          out[o * sp.inner + i] += x[(o * sp.extent + e) * sp.inner + i];
    return Array<T>(out_shape, std::move(out));
  }

  void backward(std::span<const Array<T>> in, const Array<T>&, const Array<T>& g,
                std::span<const bool> needs, std::span<Array<T>> grads) const override {
    if (!needs[0]) return;
    const auto sp = split_at(in[0].shape(), axis_);
    Storage<T> ga(in[0].size());
    auto gd = g.data();
    for (std::size_t o = 0; o < sp.outer; ++o)
      for (std::size_t e = 0; e < sp.extent; ++e)
        for (std::size_t i = 0; i < sp.inner; ++i)
          ga[(o * sp.extent + e) * sp.inner + i] = gd[o * sp.inner + i];
    grads[0] = Array<T>(in[0].shape(), std::move(ga));
  }

 private:
  std::size_t axis_;
};

template <typename T>
class LayerNormOp final : public Primitive<T> {
 public:
  explicit LayerNormOp(double eps) : eps_(static_cast<T>(eps)) {}
  std::string name() const override { return "layer_norm"; }

  Array<T> forward(std::span<const Array<T>> in) const override {
    const auto& a = in[0];
    if (a.rank() < 1) shape_error(name(), a.shape(), "needs rank >= 1");
    const std::size_t k = a.shape().back();
    Storage<T> out(a.size());
    auto x = a.data();
    for (std::size_t r = 0; r < a.size(); r += k) {
      T mu = 0;
      for (std::size_t j = 0; j < k; ++j) mu += x[r + j];
      mu /= static_cast<T>(k);
      T var = 0;
      for (std::size_t j = 0; j < k; ++j) var += (x[r + j] - mu) * (x[r + j] - mu);
      var /= static_cast<T>(k);
      const T inv = T{1} / std::sqrt(var + eps_);
      for (std::size_t j = 0; j < k; ++j) out[r + j] = (x[r + j] - mu) * inv;
    }
    return Array<T>(a.shape(), std::move(out));
  }

  void backward(std::span<const Array<T>> in, const Array<T>& out, const Array<T>& g,
                std::span<const bool> needs, std::span<Array<T>> grads) const override {
    if (!needs[0]) return;
    const auto& a = in[0];
    const std::size_t k = a.shape().back();
    auto x = a.data();
    auto y = out.data();
    auto gd = g.data();
    Storage<T> ga(a.size());
    for (std::size_t r = 0; r < a.size(); r += k) {
      T mu = 0;
      for (std::size_t j = 0; j < k; ++j) mu += x[r + j];
      mu /= static_cast<T>(k);
      T var = 0;
      for (std::size_t j = 0; j < k; ++j) var += (x[r + j] - mu) * (x[r + j] - mu);
      var /= static_cast<T>(k);
      const T inv = T{1} / std::sqrt(var + eps_);
      T gm = 0, gy = 0;
      for (std::size_t j = 0; j < k; ++j) {
        gm += gd[r + j];
        gy += gd[r + j] * y[r + j];
      }
      gm /= static_cast<T>(k);
      gy /= static_cast<T>(k);
      for (std::size_t j = 0; j < k; ++j) ga[r + j] = inv * (gd[r + j] - gm - y[r + j] * gy);
    }
    grads[0] = Array<T>(a.shape(), std::move(ga));
  }

 private:
  T eps_;
};

template <typename T, typename P, typename... Args>
Var<T> run(std::initializer_list<Var<T>> inputs, Args&&... args) {
  std::vector<Var<T>> v(inputs);
  return apply<T>(std::make_shared<const P>(std::forward<Args>(args)...), v);
}

}  // namespace

// ---------------------------------------------------------------------------
// Graph

template <typename T>
Var<T> Graph<T>::leaf(const std::string& name, Array<T> value) {
  if (leaves_.count(name)) {
    throw Error(ErrorCode::kInvalidArgument, "graph leaf '" + name + "' registered twice");
  }
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  n.leaf_name = name;
  nodes_.push_back(std::move(n));
  leaves_[name] = nodes_.size() - 1;
  return make_var(nodes_.size() - 1);
}

template <typename T>
Var<T> Graph<T>::constant(Array<T> value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return make_var(nodes_.size() - 1);
}

template <typename T>
std::size_t Graph<T>::node_of(const Var<T>& v) {
  if (v.graph_ == this) return v.node_;
  if (v.graph_ == nullptr) return constant(v.value_).node_;
  throw Error(ErrorCode::kInvalidArgument, "operation mixes values from different graphs");
}

template <typename T>
Var<T> Graph<T>::record(std::shared_ptr<const Primitive<T>> op, std::span<const Var<T>> inputs) {
  Node n;
  n.inputs.reserve(inputs.size());
  std::vector<Array<T>> values;
  values.reserve(inputs.size());
  for (const auto& in : inputs) {
    const std::size_t id = node_of(in);
    n.inputs.push_back(id);
    n.requires_grad = n.requires_grad || nodes_[id].requires_grad;
    values.push_back(nodes_[id].value);
  }
  n.value = op->forward(values);
  check_finite(op->name(), n.value);
  n.op = std::move(op);
  nodes_.push_back(std::move(n));
  return make_var(nodes_.size() - 1);
}

template <typename T>
ParamMap<T> Graph<T>::backward(const Var<T>& output) const {
  if (output.graph_ != this) {
    throw Error(ErrorCode::kInvalidArgument, "backward: output does not belong to this graph");
  }
  const auto& out_value = nodes_[output.node_].value;
  if (out_value.size() != 1) {
    throw Error(ErrorCode::kShape, "backward: output must be scalar, got shape " +
                                       shape_string(out_value.shape()));
  }
  std::vector<Array<T>> grads(nodes_.size());
  grads[output.node_] = Array<T>(out_value.shape(), T{1});
  std::vector<Array<T>> inputs;
  std::vector<Array<T>> local;
  for (std::size_t id = output.node_ + 1; id-- > 0;) {
    const Node& node = nodes_[id];
    if (!node.op || !node.requires_grad || grads[id].empty()) continue;
    const std::size_t k = node.inputs.size();
    inputs.clear();
    for (auto in : node.inputs) inputs.push_back(nodes_[in].value);
    std::unique_ptr<bool[]> needs(new bool[k]);
    for (std::size_t i = 0; i < k; ++i) needs[i] = nodes_[node.inputs[i]].requires_grad;
    local.assign(k, Array<T>());
    node.op->backward(inputs, node.value, grads[id], std::span<const bool>(needs.get(), k), local);
    for (std::size_t i = 0; i < k; ++i) {
      if (!needs[i]) continue;
      if (local[i].shape() != nodes_[node.inputs[i]].value.shape()) {
        throw Error(ErrorCode::kInternal, node.op->name() + ": gradient shape " +
                                              shape_string(local[i].shape()) + " != input shape " +
                                              shape_string(nodes_[node.inputs[i]].value.shape()));
      }
      accumulate(grads[node.inputs[i]], std::move(local[i]));
    }
    grads[id] = Array<T>();
  }
  ParamMap<T> result;
  for (const auto& [name, id] : leaves_) {
    result[name] = grads[id].empty() ? Array<T>(nodes_[id].value.shape(), T{0}) : grads[id];
  }
  return result;
}

template <typename T>
void Graph<T>::set_leaf(const std::string& name, Array<T> value) {
  auto it = leaves_.find(name);
  if (it == leaves_.end()) throw Error(ErrorCode::kInvalidArgument, "no graph leaf named '" + name + "'");
  if (value.shape() != nodes_[it->second].value.shape()) {
    shape_error("set_leaf", nodes_[it->second].value.shape(), value.shape());
  }
  nodes_[it->second].value = std::move(value);
}

template <typename T>
Array<T> Graph<T>::replay(const Var<T>& output) {
  std::vector<Array<T>> values;
  for (auto& node : nodes_) {
    if (!node.op) continue;
    values.clear();
    for (auto in : node.inputs) values.push_back(nodes_[in].value);
    node.value = node.op->forward(values);
    check_finite(node.op->name(), node.value);
  }
  return value(output);
}

template <typename T>
const Array<T>& Graph<T>::value(const Var<T>& v) const {
  if (v.graph_ != this) throw Error(ErrorCode::kInvalidArgument, "value: foreign variable");
  return nodes_[v.node_].value;
}

template <typename T>
std::vector<std::string> Graph<T>::leaf_names() const {
  std::vector<std::string> names;
  for (const auto& [name, id] : leaves_) names.push_back(name);
  return names;
}

template <typename T>
Var<T> apply(std::shared_ptr<const Primitive<T>> op, std::span<const Var<T>> inputs) {
  Graph<T>* graph = nullptr;
  for (const auto& in : inputs) {
    if (in.graph() == nullptr) continue;
    if (graph != nullptr && graph != in.graph()) {
      throw Error(ErrorCode::kInvalidArgument, op->name() + ": inputs from different graphs");
    }
    graph = in.graph();
  }
  if (graph != nullptr) return graph->record(std::move(op), inputs);
  std::vector<Array<T>> values;
  values.reserve(inputs.size());
  for (const auto& in : inputs) values.push_back(in.value());
  Array<T> out = op->forward(values);
  check_finite(op->name(), out);
  return Var<T>(std::move(out));
}

template <typename T>
ParamMap<T> finite_diff_grad(const std::function<T(const ParamMap<T>&)>& f,
                             const ParamMap<T>& params, T h) {
  if (!(h > T{0})) throw Error(ErrorCode::kInvalidArgument, "finite_diff_grad: step must be positive");
  ParamMap<T> work = params;
  ParamMap<T> result;
  for (const auto& [name, base] : params) {
    typename Array<T>::Storage g(base.size());
    for (std::size_t i = 0; i < base.size(); ++i) {
      Array<T> probe = base;
      const T x = base[i];
      probe.mutable_data()[i] = x + h;
      work[name] = probe;
      const T fp = f(work);
      probe.mutable_data()[i] = x - h;
      work[name] = probe;
      const T fm = f(work);
      g[i] = (fp - fm) / (T{2} * h);
    }
    work[name] = base;
    result[name] = Array<T>(base.shape(), std::move(g));
  }
  return result;
}

namespace ops {

template <typename T> Var<T> add(const Var<T>& a, const Var<T>& b) {
  return run<T, BinaryOp<T>>({a, b}, BinaryKind::kAdd);
}
template <typename T> Var<T> sub(const Var<T>& a, const Var<T>& b) {
  return run<T, BinaryOp<T>>({a, b}, BinaryKind::kSub);
}
template <typename T> Var<T> mul(const Var<T>& a, const Var<T>& b) {
  return run<T, BinaryOp<T>>({a, b}, BinaryKind::kMul);
}
template <typename T> Var<T> div(const Var<T>& a, const Var<T>& b) {
  return run<T, BinaryOp<T>>({a, b}, BinaryKind::kDiv);
}
template <typename T> Var<T> add_scalar(const Var<T>& a, double c) {
  return run<T, UnaryOp<T, AddScalarFn<T>>>({a}, AddScalarFn<T>{static_cast<T>(c)});
}
template <typename T> Var<T> mul_scalar(const Var<T>& a, double c) {
  return run<T, UnaryOp<T, MulScalarFn<T>>>({a}, MulScalarFn<T>{static_cast<T>(c)});
}
template <typename T> Var<T> square(const Var<T>& a) { return run<T, UnaryOp<T, SquareFn<T>>>({a}); }
template <typename T> Var<T> exp(const Var<T>& a) { return run<T, UnaryOp<T, ExpFn<T>>>({a}); }
template <typename T> Var<T> sin(const Var<T>& a) { return run<T, UnaryOp<T, SinFn<T>>>({a}); }
template <typename T> Var<T> cos(const Var<T>& a) { return run<T, UnaryOp<T, CosFn<T>>>({a}); }
template <typename T> Var<T> elu(const Var<T>& a) { return run<T, UnaryOp<T, EluFn<T>>>({a}); }
template <typename T> Var<T> elu_plus_one(const Var<T>& a) {
  return run<T, EluPlusOneOp<T>>({a});
}
template <typename T> Var<T> gelu(const Var<T>& a) { return run<T, GeluOp<T>>({a}); }

template <typename T> Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  return run<T, MatmulOp<T>>({a, b});
}
template <typename T> Var<T> transpose(const Var<T>& a) { return run<T, TransposeOp<T>>({a}); }
template <typename T> Var<T> permute(const Var<T>& a, std::vector<std::size_t> axes) {
  return run<T, PermuteOp<T>>({a}, std::move(axes));
}
template <typename T> Var<T> reshape(const Var<T>& a, Shape shape) {
  return run<T, ReshapeOp<T>>({a}, std::move(shape));
}
template <typename T> Var<T> concat(std::span<const Var<T>> parts, std::size_t axis) {
  return apply<T>(std::make_shared<const ConcatOp<T>>(axis), parts);
}
template <typename T>
Var<T> slice(const Var<T>& a, std::size_t axis, std::size_t begin, std::size_t end) {
  return run<T, SliceOp<T>>({a}, axis, begin, end);
}
template <typename T> Var<T> repeat(const Var<T>& a, std::size_t n) {
  return run<T, RepeatOp<T>>({a}, n);
}
template <typename T> Var<T> add_rowwise(const Var<T>& a, const Var<T>& v) {
  return run<T, RowwiseOp<T>>({a, v}, RowKind::kAdd);
}
template <typename T> Var<T> mul_rowwise(const Var<T>& a, const Var<T>& v) {
  return run<T, RowwiseOp<T>>({a, v}, RowKind::kMul);
}
template <typename T> Var<T> div_rows(const Var<T>& a, const Var<T>& b) {
  return run<T, DivRowsOp<T>>({a, b});
}
template <typename T> Var<T> sum(const Var<T>& a) { return run<T, SumOp<T>>({a}, false); }
template <typename T> Var<T> mean(const Var<T>& a) { return run<T, SumOp<T>>({a}, true); }
template <typename T> Var<T> sum_axis(const Var<T>& a, std::size_t axis) {
  return run<T, SumAxisOp<T>>({a}, axis);
}
template <typename T> Var<T> layer_norm(const Var<T>& a, double eps) {
  return run<T, LayerNormOp<T>>({a}, eps);
}

}  // namespace ops

#define VCNEF_INSTANTIATE_OPS(T)                                                              \
  template Var<T> apply<T>(std::shared_ptr<const Primitive<T>>, std::span<const Var<T>>);    \
  template ParamMap<T> finite_diff_grad<T>(const std::function<T(const ParamMap<T>&)>&,      \
                                           const ParamMap<T>&, T);                           \
  namespace ops {                                                                             \
  template Var<T> add<T>(const Var<T>&, const Var<T>&);                                       \
  template Var<T> sub<T>(const Var<T>&, const Var<T>&);                                       \
  template Var<T> mul<T>(const Var<T>&, const Var<T>&);                                       \
  template Var<T> div<T>(const Var<T>&, const Var<T>&);                                       \
  template Var<T> add_scalar<T>(const Var<T>&, double);                                       \
  template Var<T> mul_scalar<T>(const Var<T>&, double);                                       \
  template Var<T> square<T>(const Var<T>&);                                                   \
  template Var<T> exp<T>(const Var<T>&);                                                      \
  template Var<T> sin<T>(const Var<T>&);                                                      \
  template Var<T> cos<T>(const Var<T>&);                                                      \
  template Var<T> elu<T>(const Var<T>&);                                                      \
  template Var<T> elu_plus_one<T>(const Var<T>&);                                             \
  template Var<T> gelu<T>(const Var<T>&);                                                     \
  template Var<T> matmul<T>(const Var<T>&, const Var<T>&);                                    \
  template Var<T> transpose<T>(const Var<T>&);                                                \
  template Var<T> permute<T>(const Var<T>&, std::vector<std::size_t>);                        \
  template Var<T> reshape<T>(const Var<T>&, Shape);                                           \
  template Var<T> concat<T>(std::span<const Var<T>>, std::size_t);                            \
  template Var<T> slice<T>(const Var<T>&, std::size_t, std::size_t, std::size_t);             \
  template Var<T> repeat<T>(const Var<T>&, std::size_t);                                      \
  template Var<T> add_rowwise<T>(const Var<T>&, const Var<T>&);                               \
  template Var<T> mul_rowwise<T>(const Var<T>&, const Var<T>&);                               \
  template Var<T> div_rows<T>(const Var<T>&, const Var<T>&);                                  \
  template Var<T> sum<T>(const Var<T>&);                                                      \
  template Var<T> mean<T>(const Var<T>&);                                                     \
  template Var<T> sum_axis<T>(const Var<T>&, std::size_t);                                    \
  template Var<T> layer_norm<T>(const Var<T>&, double);                                       \
  }

VCNEF_INSTANTIATE_OPS(float)
VCNEF_INSTANTIATE_OPS(double)

template class Graph<float>;
template class Graph<double>;

}  // namespace vcnef
