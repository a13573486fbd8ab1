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

// Reference computations shared by the model unit tests and the acceptance
// suite. Nothing here calls into the code under test except to obtain the
// values being checked.

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "test_util.hpp"
#include "vcnef/model.hpp"

namespace vcnef::testing {

inline double elu1(double x) { return x > 0 ? x + 1.0 : std::exp(x); }

/// Explicit n x n kernel weights W_il = Phi(q_i) . Phi(k_l).
inline std::vector<double> attention_weights(const Array<double>& q, const Array<double>& k) {
  const std::size_t n = q.dim(0), dh = q.dim(1);
  std::vector<double> w(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t l = 0; l < n; ++l)
      for (std::size_t a = 0; a < dh; ++a) w[i * n + l] += elu1(q[i * dh + a]) * elu1(k[l * dh + a]);
  return w;
}

/// Left-associated evaluation ((Phi(Q) Phi(K)^T) V) row-normalized, O(n^2).
template <typename T>
Array<T> quadratic_attention(const Array<T>& q, const Array<T>& k, const Array<T>& v, double eps = 0.0) {
  const std::size_t n = q.dim(0), dh = q.dim(1);
  std::vector<T> fq(n * dh), fk(n * dh);
  for (std::size_t i = 0; i < n * dh; ++i) {
    fq[i] = static_cast<T>(elu1(q[i]));
    fk[i] = static_cast<T>(elu1(k[i]));
  }
  Array<T> out({n, dh});
  auto o = out.mutable_data();
  std::vector<T> row(n);
  for (std::size_t i = 0; i < n; ++i) {
    T den = 0;
    for (std::size_t l = 0; l < n; ++l) {
      T w = 0;
      for (std::size_t a = 0; a < dh; ++a) w += fq[i * dh + a] * fk[l * dh + a];
      row[l] = w;
      den += w;
    }
    for (std::size_t a = 0; a < dh; ++a) {
      T acc = 0;
      for (std::size_t l = 0; l < n; ++l) acc += row[l] * v[l * dh + a];
      o[i * dh + a] = acc / (den + static_cast<T>(eps));
    }
  }
  return out;
}

inline std::vector<std::size_t> random_permutation(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), 0);
  std::shuffle(p.begin(), p.end(), rng);
  return p;
}

// rows of a [.., n, w] tensor (axis = token axis) permuted by perm.
inline Array<double> permute_rows(const Array<double>& a, const std::vector<std::size_t>& perm, std::size_t axis) {
  const auto& sh = a.shape();
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= sh[i];
  for (std::size_t i = axis + 1; i < sh.size(); ++i) inner *= sh[i];
  const std::size_t n = sh[axis];
  Array<double> out(sh);
  auto o = out.mutable_data();
  for (std::size_t b = 0; b < outer; ++b)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < inner; ++k) o[(b * n + i) * inner + k] = a[(b * n + perm[i]) * inner + k];
  return out;
}

inline ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.d = 8;
  cfg.heads = 2;
  cfg.n_enc = 1;
  cfg.n_mod = 1;
  cfg.seed = 3;
  return cfg;
}

/// Random 1D input on the unit lattice of size s.
template <typename T>
FieldInput<T> random_input_1d(std::size_t s, std::size_t j, std::mt19937_64& rng) {
  FieldInput<T> in;
  in.u0 = random_array({s, 1}, rng, -1.0, 1.0).cast<T>();
  Array<double> x({s, 1});
  for (std::size_t i = 0; i < s; ++i) x.mutable_data()[i] = static_cast<double>(i) / static_cast<double>(s);
  in.x = x.cast<T>();
  in.p = random_array({j}, rng, 0.1, 0.5).cast<T>();
  in.extents = {s};
  return in;
}

struct GradientCheck {
  double worst = 0.0;
  std::string worst_name;
  std::size_t parameters = 0;
};

/// MSE loss of the tiny model (s=4, two query times) against a random
/// target: reverse-mode gradients vs central finite differences.
inline GradientCheck tiny_gradient_check(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ModelConfig cfg = tiny_config();
  cfg.seed = seed;
  auto store = init_parameters<double>(cfg);
  // Nonzero biases so their gradients are exercised away from the init point.
  for (auto& [name, a] : store.params) {
    if (a.rank() == 1) a = random_array(a.shape(), rng, -0.2, 0.2);
  }
  const auto in = random_input_1d<double>(4, cfg.j, rng);
  const std::vector<double> times{0.5, 1.25};
  const auto target = random_array({2, 4, 1}, rng, -1.0, 1.0);

  auto loss_of = [&](const ParamMap<double>& params) {
    ParameterStore<double> s = store;
    s.params = params;
    const auto pred = forward(s, in, times);
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) acc += (pred[i] - target[i]) * (pred[i] - target[i]);
    return acc / static_cast<double>(pred.size());
  };

  Graph<double> g;
  const ParamView<double> pv(store, g);
  const auto pred = forward_graph(pv, cfg, in, times);
  const auto loss = ops::mean(ops::square(ops::sub(pred, Var<double>(target))));
  const auto ad = g.backward(loss);
  const auto fd = finite_diff_grad<double>(loss_of, store.params, 1e-5);

  GradientCheck r;
  for (const auto& [name, gfd] : fd) {
    const double e = rel_err(ad.at(name), gfd, 1e-8);
    ++r.parameters;
    if (e > r.worst) {
      r.worst = e;
      r.worst_name = name;
    }
  }
  return r;
}

}  // namespace vcnef::testing
