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

#include "vcnef/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "vcnef/error.hpp"
#include "vcnef/rng.hpp"

namespace vcnef {

namespace {

[[noreturn]] void config_error(const std::string& what) {
  throw Error(ErrorCode::kConfig, "model config: " + what);
}

std::string block(const char* kind, std::size_t i) { return kind + std::to_string(i); }

void add_attention(std::vector<std::pair<std::string, Shape>>& out, const std::string& prefix,
                   std::size_t d) {
  for (const char* m : {"q", "k", "v", "o"}) {
    out.push_back({prefix + ".w" + m, {d, d}});
    out.push_back({prefix + ".b" + m, {d}});
  }
}

void add_mlp(std::vector<std::pair<std::string, Shape>>& out, const std::string& prefix,
             std::size_t in, std::size_t hidden, std::size_t width) {
  out.push_back({prefix + ".w1", {in, hidden}});
  out.push_back({prefix + ".b1", {hidden}});
  out.push_back({prefix + ".w2", {hidden, width}});
  out.push_back({prefix + ".b2", {width}});
}

void add_linear(std::vector<std::pair<std::string, Shape>>& out, const std::string& prefix,
                std::size_t in, std::size_t width) {
  out.push_back({prefix + ".w", {in, width}});
  out.push_back({prefix + ".b", {width}});
}

struct Lattice {
  std::size_t sx, sy;
};

Lattice lattice_of(const std::vector<std::size_t>& extents) {
  if (extents.size() != 2) throw Error(ErrorCode::kShape, "2D model needs two spatial extents");
  return {extents[0], extents[1]};
}

void check_divisible(const Lattice& l, std::size_t p) {
  if (l.sx % p != 0 || l.sy % p != 0) {
    throw Error(ErrorCode::kShape, "patch size " + std::to_string(p) + " does not divide lattice " +
                                       std::to_string(l.sx) + "x" + std::to_string(l.sy));
  }
}

std::vector<std::size_t> scales(const ModelConfig& cfg) {
  if (cfg.ablation.multiscale) return {cfg.patch_small, cfg.patch_large};
  return {cfg.patch_large};
}

const char* scale_tag(const ModelConfig& cfg, std::size_t p) {
  return p == cfg.patch_large ? "l" : "s";
}

// [s, w] -> [tokens, p*p*w], tokens and payload both row-major.
template <typename T>
Var<T> patchify(const Var<T>& v, const Lattice& l, std::size_t p) {
  const std::size_t w = v.dim(1);
  auto r = ops::reshape(v, {l.sx / p, p, l.sy / p, p, w});
  r = ops::permute(r, {0, 2, 1, 3, 4});
  return ops::reshape(r, {(l.sx / p) * (l.sy / p), p * p * w});
}

// [B, tokens, p*p*w] -> [B, s, w].
template <typename T>
Var<T> unpatchify(const Var<T>& v, const Lattice& l, std::size_t p, std::size_t w) {
  const std::size_t b = v.dim(0);
  auto r = ops::reshape(v, {b, l.sx / p, l.sy / p, p, p, w});
  r = ops::permute(r, {0, 1, 3, 2, 4, 5});
  return ops::reshape(r, {b, l.sx * l.sy, w});
}

template <typename T>
Var<T> mlp(const Var<T>& x, const ParamView<T>& pv, const std::string& prefix) {
  auto h = ops::gelu(model::linear(x, pv(prefix + ".w1"), pv(prefix + ".b1")));
  return model::linear(h, pv(prefix + ".w2"), pv(prefix + ".b2"));
}

// Stacks a [n, d] (or [1, n, d]) value b times: [b, n, d].
template <typename T>
Var<T> broadcast_batch(const Var<T>& z, std::size_t b) {
  const Var<T> flat = z.rank() == 3 ? ops::reshape(z, {z.dim(1), z.dim(2)}) : z;
  return ops::repeat(flat, b);
}

template <typename T>
void check_input(const FieldInput<T>& in, const ModelConfig& cfg) {
  if (in.u0.rank() != 2 || in.u0.dim(1) != cfg.c) {
    throw Error(ErrorCode::kShape, "u0 must be [s, " + std::to_string(cfg.c) + "], got " +
                                       shape_string(in.u0.shape()));
  }
  const std::size_t s = in.u0.dim(0);
  if (in.x.rank() != 2 || in.x.dim(0) != s || in.x.dim(1) != cfg.dims) {
    throw Error(ErrorCode::kShape, "coordinates must be [" + std::to_string(s) + ", " +
                                       std::to_string(cfg.dims) + "], got " + shape_string(in.x.shape()));
  }
  if (in.p.size() != cfg.j) {
    throw Error(ErrorCode::kShape, "expected " + std::to_string(cfg.j) + " PDE parameters, got " +
                                       std::to_string(in.p.size()));
  }
  if (cfg.dims == 2) {
    const auto l = lattice_of(in.extents);
    if (l.sx * l.sy != s) throw Error(ErrorCode::kShape, "lattice extents do not multiply to s");
    for (std::size_t p : scales(cfg)) check_divisible(l, p);
  }
}

}  // namespace

void ModelConfig::validate() const {
  if (dims != 1 && dims != 2) config_error("dims must be 1 or 2");
  if (d == 0 || heads == 0 || d % heads != 0) config_error("d must be a positive multiple of heads");
  if (n_mod < 1) config_error("n_mod must be at least 1");
  if (c == 0) config_error("c must be positive");
  if (!(t_norm > 0.0)) config_error("t_norm must be positive");
  if (dims == 2) {
    if (patch_small == 0 || patch_large == 0 || patch_small == patch_large) {
      config_error("patch sizes must be positive and distinct");
    }
    if (lff_features == 0 || lff_features % 2 != 0) config_error("lff_features must be even");
    if (lff_dim == 0 || pe_dim == 0 || pe_dim % 2 != 0) config_error("lff_dim > 0, pe_dim even");
  }
}

std::size_t ModelConfig::token_count(const std::vector<std::size_t>& extents) const {
  if (dims == 1) {
    std::size_t s = 1;
    for (auto e : extents) s *= e;
    return s;
  }
  const auto l = lattice_of(extents);
  std::size_t n = 0;
  for (std::size_t p : scales(*this)) {
    check_divisible(l, p);
    n += (l.sx / p) * (l.sy / p);
  }
  return n;
}

ModelConfig default_desk_config() { return ModelConfig{}; }

template <typename T>
std::size_t ParameterStore<T>::count() const {
  std::size_t n = 0;
  for (const auto& [k, v] : params) n += v.size();
  return n;
}

std::vector<std::pair<std::string, Shape>> parameter_layout(const ModelConfig& cfg) {
  cfg.validate();
  const std::size_t d = cfg.d, D = cfg.dims;
  std::vector<std::pair<std::string, Shape>> out;
  if (D == 1) {
    add_linear(out, "coord", 1 + D, d);
    add_linear(out, "ic", cfg.c + D + cfg.j, d);
  } else {
    out.push_back({"lff.wr", {D, cfg.lff_features / 2}});
    add_mlp(out, "lff", cfg.lff_features, cfg.lff_dim, cfg.lff_dim);
    for (std::size_t p : scales(cfg)) {
      const std::string tag = scale_tag(cfg, p);
      add_linear(out, "coord_" + tag, cfg.pe_dim + p * p * cfg.lff_dim, d);
      add_linear(out, "ic_" + tag, p * p * cfg.c + cfg.j, d);
    }
  }
  for (std::size_t i = 0; i < cfg.n_enc; ++i) {
    if (cfg.ablation.use_attention) add_attention(out, block("enc", i) + ".attn", d);
    add_mlp(out, block("enc", i) + ".mlp", d, 2 * d, d);
  }
  for (std::size_t i = 0; i < cfg.n_mod; ++i) {
    const std::string b = block("mod", i);
    if (cfg.ablation.use_attention) add_attention(out, b + ".attn", d);
    add_mlp(out, b + ".film", d, d, d);
    if (cfg.ablation.shift_in_film) add_mlp(out, b + ".shift", d, d, d);
    add_mlp(out, b + ".mlp", d, 2 * d, d);
  }
  if (D == 1) {
    add_mlp(out, "dec", d, d, cfg.c);
  } else {
    for (std::size_t p : scales(cfg)) add_linear(out, std::string("dec_") + scale_tag(cfg, p), d, p * p * cfg.c);
    if (cfg.ablation.multiscale) out.push_back({"mix", {2}});
  }
  return out;
}

template <typename T>
ParameterStore<T> init_parameters(const ModelConfig& cfg) {
  ParameterStore<T> store;
  store.config = cfg;
  for (const auto& [name, shape] : parameter_layout(cfg)) {
    Array<T> a(shape);
    if (shape.size() == 2) {
      std::mt19937_64 rng(derive_seed(cfg.seed, std::string_view(name)));
      const double bound = name == "lff.wr" ? cfg.lff_scale : 1.0 / std::sqrt(static_cast<double>(shape[0]));
      for (auto& v : a.mutable_data()) v = static_cast<T>(uniform(rng, -bound, bound));
    }
    if (!store.params.emplace(name, std::move(a)).second) {
      throw Error(ErrorCode::kInternal, "parameter registered twice: " + name);
    }
  }
  if (cfg.dims == 2 && !cfg.lff_trainable) store.frozen.insert("lff.wr");
  return store;
}

template <typename T>
ParamView<T>::ParamView(const ParameterStore<T>& store) {
  for (const auto& [k, v] : store.params) vars_.emplace(k, Var<T>(v));
}

template <typename T>
ParamView<T>::ParamView(const ParameterStore<T>& store, Graph<T>& graph) {
  for (const auto& [k, v] : store.params) {
    vars_.emplace(k, store.trainable(k) ? graph.leaf(k, v) : graph.constant(v));
  }
}

template <typename T>
const Var<T>& ParamView<T>::operator()(const std::string& name) const {
  auto it = vars_.find(name);
  if (it == vars_.end()) throw Error(ErrorCode::kInvalidArgument, "unknown parameter '" + name + "'");
  return it->second;
}

namespace model {

template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
  const std::size_t in = w.dim(0), width = w.dim(1);
  if (x.shape().empty() || x.shape().back() != in) {
    throw Error(ErrorCode::kShape, "linear: input " + shape_string(x.shape()) + " vs weight " +
                                       shape_string(w.shape()));
  }
  const std::size_t rows = x.value().size() / in;
  auto y = ops::matmul(ops::reshape(x, {rows, in}), w);
  y = ops::add_rowwise(y, b);
  Shape out = x.shape();
  out.back() = width;
  return ops::reshape(y, out);
}

template <typename T>
Var<T> linear_attention(const Var<T>& q, const Var<T>& k, const Var<T>& v, double eps) {
  if (q.shape() != k.shape() || q.shape() != v.shape() || (q.rank() != 2 && q.rank() != 3)) {
    throw Error(ErrorCode::kShape, "linear_attention: Q " + shape_string(q.shape()) + ", K " +
                                       shape_string(k.shape()) + ", V " + shape_string(v.shape()));
  }
  const bool single = q.rank() == 2;
  auto lift = [&](const Var<T>& a) { return single ? ops::reshape(a, {1, a.dim(0), a.dim(1)}) : a; };
  const auto fq = ops::elu_plus_one(lift(q));
  const auto fk = ops::elu_plus_one(lift(k));
  const std::size_t b = fq.dim(0), dh = fq.dim(2);
  const auto kv = ops::matmul(ops::transpose(fk), lift(v));  // [b, dh, dh]
  const auto num = ops::matmul(fq, kv);                       // [b, n, dh]
  const auto ksum = ops::reshape(ops::sum_axis(fk, 1), {b, dh, 1});
  auto den = ops::matmul(fq, ksum);  // [b, n, 1]
  if (eps != 0.0) den = ops::add_scalar(den, eps);
  auto out = ops::div_rows(num, den);
  return single ? ops::reshape(out, q.shape()) : out;
}

template <typename T>
Var<T> self_attention(const Var<T>& z, const ParamView<T>& pv, const std::string& prefix,
                      std::size_t heads, double eps) {
  const std::size_t b = z.dim(0), n = z.dim(1), d = z.dim(2), dh = d / heads;
  auto split = [&](const Var<T>& a) {
    if (heads == 1) return a;
    auto r = ops::permute(ops::reshape(a, {b, n, heads, dh}), {0, 2, 1, 3});
    return ops::reshape(r, {b * heads, n, dh});
  };
  const auto q = split(linear(z, pv(prefix + ".wq"), pv(prefix + ".bq")));
  const auto k = split(linear(z, pv(prefix + ".wk"), pv(prefix + ".bk")));
  const auto v = split(linear(z, pv(prefix + ".wv"), pv(prefix + ".bv")));
  auto a = linear_attention(q, k, v, eps);
  if (heads != 1) {
    a = ops::permute(ops::reshape(a, {b, heads, n, dh}), {0, 2, 1, 3});
    a = ops::reshape(a, {b, n, d});
  }
  return linear(a, pv(prefix + ".wo"), pv(prefix + ".bo"));
}

std::vector<double> positional_encoding(double t, std::size_t dim) {
  std::vector<double> pe(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    const double freq = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(dim));
    pe[i] = i % 2 == 0 ? std::sin(t * freq) : std::cos(t * freq);
  }
  return pe;
}

template <typename T>
Var<T> fourier_features(const Var<T>& x, const Var<T>& w_r) {
  const auto proj = ops::matmul(x, w_r);
  const double scale = 1.0 / std::sqrt(static_cast<double>(2 * w_r.dim(1)));
  const Var<T> parts[2] = {ops::cos(proj), ops::sin(proj)};
  return ops::mul_scalar(ops::concat<T>(parts, 1), scale);
}

template <typename T>
Var<T> learnable_fourier_features(const Var<T>& x, const ParamView<T>& pv) {
  return mlp(fourier_features(x, pv("lff.wr")), pv, "lff");
}

template <typename T>
Var<T> encode_coords(const std::vector<double>& times, const FieldInput<T>& in,
                     const ParamView<T>& pv, const ModelConfig& cfg) {
  const std::size_t nb = times.size(), s = in.x.dim(0);
  if (cfg.dims == 1) {
    Array<T> tx({nb, s, 2});
    auto o = tx.mutable_data();
    for (std::size_t b = 0; b < nb; ++b) {
      for (std::size_t i = 0; i < s; ++i) {
        o[(b * s + i) * 2] = static_cast<T>(times[b] / cfg.t_norm);
        o[(b * s + i) * 2 + 1] = in.x[i];
      }
    }
    return linear(Var<T>(std::move(tx)), pv("coord.w"), pv("coord.b"));
  }
  const auto l = lattice_of(in.extents);
  const auto lff = learnable_fourier_features(Var<T>(in.x), pv);  // [s, lff_dim]
  std::vector<Var<T>> branches;
  for (std::size_t p : scales(cfg)) {
    const auto patches = patchify(lff, l, p);  // [tokens, p*p*lff_dim]
    const std::size_t ntok = patches.dim(0);
    Array<T> pe({nb, ntok, cfg.pe_dim});
    auto o = pe.mutable_data();
    for (std::size_t b = 0; b < nb; ++b) {
      const auto e = positional_encoding(times[b] / cfg.t_norm, cfg.pe_dim);
      for (std::size_t k = 0; k < ntok; ++k) {
        for (std::size_t i = 0; i < cfg.pe_dim; ++i) o[(b * ntok + k) * cfg.pe_dim + i] = static_cast<T>(e[i]);
      }
    }
    const Var<T> parts[2] = {Var<T>(std::move(pe)), ops::repeat(patches, nb)};
    const std::string tag = std::string("coord_") + scale_tag(cfg, p);
    branches.push_back(linear(ops::concat<T>(parts, 2), pv(tag + ".w"), pv(tag + ".b")));
  }
  return branches.size() == 1 ? branches[0] : ops::concat<T>(branches, 1);
}

template <typename T>
Var<T> encode_ic(const FieldInput<T>& in, const ParamView<T>& pv, const ModelConfig& cfg) {
  const std::size_t s = in.u0.dim(0), c = cfg.c, j = cfg.j;
  if (cfg.dims == 1) {
    const std::size_t w = c + 1 + j;
    Array<T> feats({s, w});
    auto o = feats.mutable_data();
    for (std::size_t i = 0; i < s; ++i) {
      for (std::size_t ch = 0; ch < c; ++ch) o[i * w + ch] = in.u0[i * c + ch];
      o[i * w + c] = in.x[i];
      for (std::size_t q = 0; q < j; ++q) o[i * w + c + 1 + q] = in.p[q];
    }
    auto z = linear(Var<T>(std::move(feats)), pv("ic.w"), pv("ic.b"));
    return ops::reshape(z, {1, s, cfg.d});
  }
  const auto l = lattice_of(in.extents);
  std::vector<Var<T>> branches;
  for (std::size_t p : scales(cfg)) {
    const auto patches = patchify(Var<T>(in.u0), l, p);
    const std::size_t ntok = patches.dim(0);
    Array<T> params({ntok, j});
    auto o = params.mutable_data();
    for (std::size_t k = 0; k < ntok; ++k)
      for (std::size_t q = 0; q < j; ++q) o[k * j + q] = in.p[q];
    const Var<T> parts[2] = {patches, Var<T>(std::move(params))};
    const std::string tag = std::string("ic_") + scale_tag(cfg, p);
    branches.push_back(linear(ops::concat<T>(parts, 1), pv(tag + ".w"), pv(tag + ".b")));
  }
  auto z = branches.size() == 1 ? branches[0] : ops::concat<T>(branches, 0);
  return ops::reshape(z, {1, z.dim(0), cfg.d});
}

template <typename T>
Var<T> transformer_block(const Var<T>& z, const ParamView<T>& pv, std::size_t index,
                         const ModelConfig& cfg) {
  const std::string prefix = block("enc", index);
  const auto a = cfg.ablation.use_attention
                     ? self_attention(z, pv, prefix + ".attn", cfg.heads, attention_eps<T>())
                     : z;
  const auto h = ops::layer_norm(ops::add(z, a));
  return ops::layer_norm(ops::add(h, mlp(h, pv, prefix + ".mlp")));
}

template <typename T>
Var<T> film(const Var<T>& h1, const Var<T>& g, const Var<T>* shift) {
  auto h2 = ops::mul(ops::elu_plus_one(h1), g);
  return shift ? ops::add(h2, *shift) : h2;
}

template <typename T>
Var<T> modulation_block(const Var<T>& c, const Var<T>& z, const ParamView<T>& pv,
                        std::size_t index, const ModelConfig& cfg) {
  if (c.rank() != 3 || z.rank() != 3 || c.dim(1) != z.dim(1) || c.dim(2) != z.dim(2) ||
      (z.dim(0) != 1 && z.dim(0) != c.dim(0))) {
    throw Error(ErrorCode::kShape, "modulation_block: coordinate latent " + shape_string(c.shape()) +
                                       " vs IC latent " + shape_string(z.shape()));
  }
  const std::string prefix = block("mod", index);
  const auto a = cfg.ablation.use_attention
                     ? self_attention(z, pv, prefix + ".attn", cfg.heads, attention_eps<T>())
                     : z;
  auto h1 = ops::layer_norm(ops::add(z, a));
  // The first block sees the time-independent latent: attend once, then
  // share the result across all query times.
  if (h1.dim(0) != c.dim(0)) h1 = broadcast_batch(h1, c.dim(0));
  const auto g = mlp(c, pv, prefix + ".film");
  Var<T> h2;
  if (cfg.ablation.shift_in_film) {
    const auto shift = mlp(c, pv, prefix + ".shift");
    h2 = film(h1, g, &shift);
  } else {
    h2 = film<T>(h1, g, nullptr);
  }
  return ops::layer_norm(ops::add(h1, mlp(h2, pv, prefix + ".mlp")));
}

template <typename T>
Var<T> decode(const Var<T>& z, const FieldInput<T>& in, const ParamView<T>& pv,
              const ModelConfig& cfg) {
  if (cfg.dims == 1) return mlp(z, pv, "dec");
  const auto l = lattice_of(in.extents);
  if (z.rank() != 3 || z.dim(1) != cfg.token_count(in.extents)) {
    throw Error(ErrorCode::kShape, "decode: token layout " + shape_string(z.shape()) +
                                       " does not match lattice " + std::to_string(l.sx) + "x" +
                                       std::to_string(l.sy));
  }
  std::vector<Var<T>> recon;
  std::size_t offset = 0;
  for (std::size_t p : scales(cfg)) {
    const std::size_t ntok = (l.sx / p) * (l.sy / p);
    const auto tokens = ops::slice(z, 1, offset, offset + ntok);
    offset += ntok;
    const std::string tag = std::string("dec_") + scale_tag(cfg, p);
    recon.push_back(unpatchify(linear(tokens, pv(tag + ".w"), pv(tag + ".b")), l, p, cfg.c));
  }
  if (recon.size() == 1) return recon[0];
  const auto e = ops::exp(pv("mix"));
  const auto total = ops::sum(e);
  const auto w_small = ops::div(ops::slice(e, 0, 0, 1), total);
  const auto w_large = ops::div(ops::slice(e, 0, 1, 2), total);
  return ops::add(ops::mul(w_small, recon[0]), ops::mul(w_large, recon[1]));
}

template <typename T>
Var<T> encode(const FieldInput<T>& in, const ParamView<T>& pv, const ModelConfig& cfg) {
  check_input(in, cfg);
  auto z = encode_ic(in, pv, cfg);
  for (std::size_t i = 0; i < cfg.n_enc; ++i) z = transformer_block(z, pv, i, cfg);
  return z;
}

template <typename T>
Var<T> query(const Var<T>& z_enc, const std::vector<double>& times, const FieldInput<T>& in,
             const ParamView<T>& pv, const ModelConfig& cfg) {
  if (times.empty()) throw Error(ErrorCode::kInvalidArgument, "forward: empty query times");
  for (double t : times) {
    if (!(t >= 0.0) || !std::isfinite(t)) throw Error(ErrorCode::kInvalidArgument, "forward: query times must be finite and >= 0");
  }
  const auto c = encode_coords(times, in, pv, cfg);
  Var<T> z = z_enc;
  for (std::size_t i = 0; i < cfg.n_mod; ++i) z = modulation_block(c, z, pv, i, cfg);
  return decode(z, in, pv, cfg);
}

}  // namespace model

template <typename T>
Var<T> forward_graph(const ParamView<T>& pv, const ModelConfig& cfg, const FieldInput<T>& in,
                     const std::vector<double>& times) {
  return model::query(model::encode(in, pv, cfg), times, in, pv, cfg);
}

template <typename T>
Array<T> forward(const ParameterStore<T>& store, const FieldInput<T>& in,
                 const std::vector<double>& times, RolloutMode mode) {
  const ParamView<T> pv(store);
  const auto& cfg = store.config;
  const auto z = model::encode(in, pv, cfg);
  if (mode == RolloutMode::kParallel) return model::query(z, times, in, pv, cfg).value();
  if (times.empty()) throw Error(ErrorCode::kInvalidArgument, "forward: empty query times");
  const std::size_t s = in.u0.dim(0), frame = s * cfg.c;
  Array<T> out({times.size(), s, cfg.c});
  auto o = out.mutable_data();
  for (std::size_t k = 0; k < times.size(); ++k) {
    const auto y = model::query(z, {times[k]}, in, pv, cfg);
    std::copy_n(y.value().data().data(), frame, o.data() + k * frame);
  }
  return out;
}

#define VCNEF_INSTANTIATE_MODEL(T)                                                                  \
  template struct ParameterStore<T>;                                                                \
  template class ParamView<T>;                                                                      \
  template ParameterStore<T> init_parameters<T>(const ModelConfig&);                                \
  template Var<T> model::linear(const Var<T>&, const Var<T>&, const Var<T>&);                       \
  template Var<T> model::linear_attention(const Var<T>&, const Var<T>&, const Var<T>&, double);     \
  template Var<T> model::self_attention(const Var<T>&, const ParamView<T>&, const std::string&,     \
                                        std::size_t, double);                                       \
  template Var<T> model::fourier_features(const Var<T>&, const Var<T>&);                            \
  template Var<T> model::learnable_fourier_features(const Var<T>&, const ParamView<T>&);            \
  template Var<T> model::encode_coords(const std::vector<double>&, const FieldInput<T>&,            \
                                       const ParamView<T>&, const ModelConfig&);                    \
  template Var<T> model::encode_ic(const FieldInput<T>&, const ParamView<T>&, const ModelConfig&);  \
  template Var<T> model::transformer_block(const Var<T>&, const ParamView<T>&, std::size_t,         \
                                           const ModelConfig&);                                     \
  template Var<T> model::film(const Var<T>&, const Var<T>&, const Var<T>*);                         \
  template Var<T> model::modulation_block(const Var<T>&, const Var<T>&, const ParamView<T>&,        \
                                          std::size_t, const ModelConfig&);                         \
  template Var<T> model::decode(const Var<T>&, const FieldInput<T>&, const ParamView<T>&,           \
                                const ModelConfig&);                                                \
  template Var<T> model::encode(const FieldInput<T>&, const ParamView<T>&, const ModelConfig&);     \
  template Var<T> model::query(const Var<T>&, const std::vector<double>&, const FieldInput<T>&,     \
                               const ParamView<T>&, const ModelConfig&);                            \
  template Var<T> forward_graph(const ParamView<T>&, const ModelConfig&, const FieldInput<T>&,      \
                                const std::vector<double>&);                                        \
  template Array<T> forward(const ParameterStore<T>&, const FieldInput<T>&,                         \
                            const std::vector<double>&, RolloutMode);

VCNEF_INSTANTIATE_MODEL(float)
VCNEF_INSTANTIATE_MODEL(double)

}  // namespace vcnef
