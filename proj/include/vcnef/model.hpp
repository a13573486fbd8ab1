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

// The vectorized conditional neural field.
//
// The IC latent is built once per initial condition and refined by linear
// transformer blocks. For every query time the coordinate latent C(t)
// modulates it through the modulation blocks, and a decoder maps tokens
// back to field values. Every stage works on rank-3 tensors [B, tokens, d]
// where B counts query times evaluated together.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "vcnef/array.hpp"
#include "vcnef/autodiff.hpp"

namespace vcnef {

struct Ablation {
  bool use_attention = true;
  bool shift_in_film = false;
  bool multiscale = true;  // 2D: small and large patches, otherwise large only
};

struct ModelConfig {
  std::size_t dims = 1;  // 1 or 2
  std::size_t d = 64;
  std::size_t heads = 4;
  std::size_t n_enc = 2;
  std::size_t n_mod = 2;
  std::size_t c = 1;
  std::size_t j = 1;
  // 2D only
  std::size_t patch_small = 4;
  std::size_t patch_large = 16;
  std::size_t pe_dim = 16;
  std::size_t lff_features = 16;  // cos/sin features, W_r is [2, lff_features / 2]
  std::size_t lff_dim = 8;        // LFF MLP output per coordinate
  double lff_scale = 8.0;         // W_r ~ U(-scale, scale)
  bool lff_trainable = true;

  Ablation ablation;
  double t_norm = 2.0;  // query times are divided by this before encoding
  std::uint64_t seed = 0;

  /// Throws kConfig when an invariant fails.
  void validate() const;
  /// Number of IC tokens for a lattice with the given spatial extents.
  std::size_t token_count(const std::vector<std::size_t>& extents) const;
};

ModelConfig default_desk_config();

/// Named trainable arrays plus the set of frozen names.
template <typename T>
struct ParameterStore {
  ModelConfig config;
  ParamMap<T> params;
  std::set<std::string> frozen;

  std::size_t count() const;  // scalar parameters, frozen included
  bool trainable(const std::string& name) const { return !frozen.count(name); }
  template <typename U>
  ParameterStore<U> cast() const {
    ParameterStore<U> out{config, {}, frozen};
    for (const auto& [k, v] : params) out.params.emplace(k, v.template cast<U>());
    return out;
  }
};

/// Parameter shapes for a configuration, in registration order.
std::vector<std::pair<std::string, Shape>> parameter_layout(const ModelConfig& config);

/// Uniform fan-in initialization: weights U(-1/sqrt(fan_in), 1/sqrt(fan_in)),
/// zero biases, zero patch-mix logits. Each array draws from its own stream
/// seeded by (seed, name).
template <typename T>
ParameterStore<T> init_parameters(const ModelConfig& config);

/// Variables for every parameter, either free values or graph nodes.
template <typename T>
class ParamView {
 public:
  /// Free values, nothing recorded.
  explicit ParamView(const ParameterStore<T>& store);
  /// Trainable arrays become graph leaves, frozen ones constants.
  ParamView(const ParameterStore<T>& store, Graph<T>& graph);

  const Var<T>& operator()(const std::string& name) const;
  bool has(const std::string& name) const { return vars_.count(name) != 0; }

 private:
  std::map<std::string, Var<T>> vars_;
};

/// One initial condition on a lattice.
template <typename T>
struct FieldInput {
  Array<T> u0;                       // [s, c]
  Array<T> x;                        // [s, D], unit-interval coordinates
  Array<T> p;                        // [j]
  std::vector<std::size_t> extents;  // spatial lattice, product == s
};

/// Denominator stabilizer of linear attention for the given precision.
template <typename T>
constexpr double attention_eps() {
  return sizeof(T) == sizeof(float) ? 1e-6 : 0.0;
}

namespace model {

/// x [..., in] times W [in, out] plus b [out].
template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b);

/// Single- or multi-batch linear attention, Q, K, V [n, dh] or [B, n, dh].
/// Right-associated: Phi(Q) (Phi(K)^T V) / (Phi(Q) (Phi(K)^T 1) + eps).
template <typename T>
Var<T> linear_attention(const Var<T>& q, const Var<T>& k, const Var<T>& v, double eps);

/// Multi-head self-attention over z [B, n, d] with the block's projections.
template <typename T>
Var<T> self_attention(const Var<T>& z, const ParamView<T>& pv, const std::string& prefix,
                      std::size_t heads, double eps);

/// Interleaved sin/cos of t at geometric frequencies 10000^(-2i/dim).
std::vector<double> positional_encoding(double t, std::size_t dim);

/// 1/sqrt(F) (cos(x W_r) || sin(x W_r)) for x [n, D], before the MLP.
template <typename T>
Var<T> fourier_features(const Var<T>& x, const Var<T>& w_r);

/// LFF MLP applied to fourier_features, [n, D] -> [n, lff_dim].
template <typename T>
Var<T> learnable_fourier_features(const Var<T>& x, const ParamView<T>& pv);

/// C(t) for every query time: [B, tokens, d].
template <typename T>
Var<T> encode_coords(const std::vector<double>& times, const FieldInput<T>& in,
                     const ParamView<T>& pv, const ModelConfig& cfg);

/// Z0 for the IC: [1, tokens, d].
template <typename T>
Var<T> encode_ic(const FieldInput<T>& in, const ParamView<T>& pv, const ModelConfig& cfg);

template <typename T>
Var<T> transformer_block(const Var<T>& z, const ParamView<T>& pv, std::size_t index,
                         const ModelConfig& cfg);

/// h2 = sigma(h1) * g (+ shift).
template <typename T>
Var<T> film(const Var<T>& h1, const Var<T>& g, const Var<T>* shift);

/// z is [1, n, d] (time-independent, computed once and repeated) or
/// [B, n, d]; c is [B, n, d].
template <typename T>
Var<T> modulation_block(const Var<T>& c, const Var<T>& z, const ParamView<T>& pv,
                        std::size_t index, const ModelConfig& cfg);

/// [B, tokens, d] -> [B, s, c].
template <typename T>
Var<T> decode(const Var<T>& z, const FieldInput<T>& in, const ParamView<T>& pv,
              const ModelConfig& cfg);

/// Z after the encoder blocks, [1, tokens, d].
template <typename T>
Var<T> encode(const FieldInput<T>& in, const ParamView<T>& pv, const ModelConfig& cfg);

/// Modulation and decoding for a batch of query times, [B, s, c].
template <typename T>
Var<T> query(const Var<T>& z_enc, const std::vector<double>& times, const FieldInput<T>& in,
             const ParamView<T>& pv, const ModelConfig& cfg);

}  // namespace model

enum class RolloutMode { kParallel, kSequential };

/// Prediction [N_t_q, s, c] for physical query times (divided by t_norm
/// internally). Parallel mode evaluates all times in one batch, sequential
/// mode one time at a time into a preallocated output.
template <typename T>
Array<T> forward(const ParameterStore<T>& store, const FieldInput<T>& in,
                 const std::vector<double>& times, RolloutMode mode = RolloutMode::kParallel);

/// Differentiable forward pass recorded in `graph`, [N_t_q, s, c].
template <typename T>
Var<T> forward_graph(const ParamView<T>& pv, const ModelConfig& cfg, const FieldInput<T>& in,
                     const std::vector<double>& times);

}  // namespace vcnef
