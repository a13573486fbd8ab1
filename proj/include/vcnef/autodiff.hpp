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

// Reverse-mode differentiation over Array values.
//
// A Var is either a free value (no graph, nothing recorded) or a node of a
// Graph. Operations on free values just compute; as soon as one input lives
// in a graph the operation is recorded there. Inference therefore runs on
// free values and releases intermediates eagerly, while training binds the
// parameters as graph leaves.

#pragma once

#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "vcnef/array.hpp"

namespace vcnef {

template <typename T>
using ParamMap = std::map<std::string, Array<T>>;

template <typename T>
class Graph;

/// A primitive differentiable operation. Implementations are stateless
/// apart from their static attributes (axis, epsilon, ...).
template <typename T>
class Primitive {
 public:
  virtual ~Primitive() = default;
  virtual std::string name() const = 0;
  virtual Array<T> forward(std::span<const Array<T>> inputs) const = 0;
  /// Fills grads[i] for every i with needs[i] set.
  virtual void backward(std::span<const Array<T>> inputs, const Array<T>& output,
                        const Array<T>& grad_output, std::span<const bool> needs,
                        std::span<Array<T>> grads) const = 0;
};

template <typename T>
class Var {
 public:
  Var() = default;
  Var(Array<T> value) : value_(std::move(value)) {}  // NOLINT: free values convert

  const Array<T>& value() const noexcept { return value_; }
  const Shape& shape() const noexcept { return value_.shape(); }
  std::size_t dim(std::size_t axis) const { return value_.dim(axis); }
  std::size_t rank() const noexcept { return value_.rank(); }
  Graph<T>* graph() const noexcept { return graph_; }
  std::size_t node() const noexcept { return node_; }

 private:
  friend class Graph<T>;
  Graph<T>* graph_ = nullptr;
  std::size_t node_ = 0;
  Array<T> value_;
};

template <typename T>
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Registers a named trainable leaf. Names are unique per graph.
  Var<T> leaf(const std::string& name, Array<T> value);
  /// Records a value that takes part in the computation without a gradient.
  Var<T> constant(Array<T> value);
  /// Records `op` applied to `inputs` and returns the output node.
  Var<T> record(std::shared_ptr<const Primitive<T>> op, std::span<const Var<T>> inputs);

  /// Gradient of a single-element output with respect to every leaf. Leaves
  /// the output does not depend on receive zeros. The graph stays usable.
  ParamMap<T> backward(const Var<T>& output) const;

  /// Replaces a leaf value; takes effect on the next replay().
  void set_leaf(const std::string& name, Array<T> value);
  /// Re-evaluates every recorded operation in order and returns the
  /// current value of `output`.
  Array<T> replay(const Var<T>& output);

  const Array<T>& value(const Var<T>& v) const;
  std::vector<std::string> leaf_names() const;
  std::size_t node_count() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    std::shared_ptr<const Primitive<T>> op;
    std::vector<std::size_t> inputs;
    Array<T> value;
    bool requires_grad = false;
    std::string leaf_name;
  };

  Var<T> make_var(std::size_t id) {
    Var<T> v;
    v.graph_ = this;
    v.node_ = id;
    v.value_ = nodes_[id].value;
    return v;
  }
  std::size_t node_of(const Var<T>& v);

  std::vector<Node> nodes_;
  std::map<std::string, std::size_t> leaves_;
};

/// Applies `op`, recording it when any input belongs to a graph.
template <typename T>
Var<T> apply(std::shared_ptr<const Primitive<T>> op, std::span<const Var<T>> inputs);

/// Central differences (f(x+h) - f(x-h)) / 2h for every coordinate of every
/// parameter.
template <typename T>
ParamMap<T> finite_diff_grad(const std::function<T(const ParamMap<T>&)>& f,
                             const ParamMap<T>& params, T h = T(1e-5));

namespace ops {

// Elementwise binary ops take equal shapes, or a single-element operand on
// either side. There is no other implicit broadcasting.
template <typename T> Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> mul(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> div(const Var<T>& a, const Var<T>& b);

template <typename T> Var<T> add_scalar(const Var<T>& a, double c);
template <typename T> Var<T> mul_scalar(const Var<T>& a, double c);
template <typename T> Var<T> square(const Var<T>& a);
template <typename T> Var<T> exp(const Var<T>& a);
template <typename T> Var<T> sin(const Var<T>& a);
template <typename T> Var<T> cos(const Var<T>& a);
template <typename T> Var<T> elu(const Var<T>& a);
/// ELU(x) + 1, the positive feature map used by linear attention.
template <typename T> Var<T> elu_plus_one(const Var<T>& a);
template <typename T> Var<T> gelu(const Var<T>& a);

/// [m,k] x [k,n] or batched [b,m,k] x [b,k,n].
template <typename T> Var<T> matmul(const Var<T>& a, const Var<T>& b);
/// Swaps the last two axes.
template <typename T> Var<T> transpose(const Var<T>& a);
template <typename T> Var<T> permute(const Var<T>& a, std::vector<std::size_t> axes);
template <typename T> Var<T> reshape(const Var<T>& a, Shape shape);
template <typename T> Var<T> concat(std::span<const Var<T>> parts, std::size_t axis);
template <typename T>
Var<T> slice(const Var<T>& a, std::size_t axis, std::size_t begin, std::size_t end);
/// Stacks `n` copies along a new leading axis.
template <typename T> Var<T> repeat(const Var<T>& a, std::size_t n);

/// a[..., k] + v[k] for every row.
template <typename T> Var<T> add_rowwise(const Var<T>& a, const Var<T>& v);
/// a[..., k] * v[k] for every row.
template <typename T> Var<T> mul_rowwise(const Var<T>& a, const Var<T>& v);
/// a[..., k] / b[..., 1]: each row divided by its own scalar.
template <typename T> Var<T> div_rows(const Var<T>& a, const Var<T>& b);

template <typename T> Var<T> sum(const Var<T>& a);
template <typename T> Var<T> mean(const Var<T>& a);
template <typename T> Var<T> sum_axis(const Var<T>& a, std::size_t axis);

/// (x - mean) / sqrt(var + eps) over the last axis, no affine part.
template <typename T> Var<T> layer_norm(const Var<T>& a, double eps = 1e-5);

}  // namespace ops

extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace vcnef
