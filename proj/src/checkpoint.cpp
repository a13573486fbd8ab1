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

#include "vcnef/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "vcnef/binary_io.hpp"
#include "vcnef/error.hpp"
#include "vcnef/json_util.hpp"

namespace vcnef {

namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'V', 'C', 'N', 'P'};
constexpr std::uint64_t kMaxRank = 8;

template <typename T>
const char* dtype_name() {
  return sizeof(T) == 4 ? "f32" : "f64";
}

template <typename S, typename T>
void read_payload(std::istream& in, Array<T>& dst) {
  std::vector<S> buf(dst.size());
  read_le_span<S>(in, buf);
  auto o = dst.mutable_data();
  for (std::size_t i = 0; i < buf.size(); ++i) o[i] = static_cast<T>(buf[i]);
}

}  // namespace

template <typename T>
void write_checkpoint(const std::filesystem::path& path, json meta, const ParamMap<T>& arrays) {
  meta["dtype"] = dtype_name<T>();
  meta["arrays"] = arrays.size();
  const std::string text = meta.dump();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot open for writing: " + path.string());
  out.write(kMagic, 4);
  write_le<std::uint32_t>(out, kCheckpointVersion);
  write_le<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [name, a] : arrays) {
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_le<std::uint64_t>(out, a.rank());
    for (std::size_t e : a.shape()) write_le<std::uint64_t>(out, e);
    write_le_span<T>(out, a.data());
  }
  out.flush();
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path.string());
}

template <typename T>
CheckpointData<T> read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open: " + path.string());
  char magic[4];
  if (!in.read(magic, 4)) throw Error(ErrorCode::kTruncated, "truncated header: " + path.string());
  if (std::memcmp(magic, kMagic, 4) != 0) throw Error(ErrorCode::kBadMagic, "bad magic: " + path.string());
  const auto version = read_le<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw Error(ErrorCode::kVersion, "unsupported checkpoint version " + std::to_string(version) +
                                         " (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  const auto len = read_le<std::uint64_t>(in);
  const auto file_bytes = std::filesystem::file_size(path);
  if (len > file_bytes) throw Error(ErrorCode::kTruncated, "truncated metadata: " + path.string());
  std::string text(len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(len))) {
    throw Error(ErrorCode::kTruncated, "truncated metadata: " + path.string());
  }
  CheckpointData<T> ck;
  std::size_t count = 0;
  std::string dtype;
  try {
    ck.meta = json::parse(text);
    count = ck.meta.at("arrays").template get<std::size_t>();
    dtype = ck.meta.at("dtype").template get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMetadata, std::string("checkpoint metadata: ") + e.what());
  }
  if (dtype != "f32" && dtype != "f64") throw Error(ErrorCode::kMetadata, "unknown dtype '" + dtype + "'");
  const std::size_t width = dtype == "f32" ? 4 : 8;

  for (std::size_t r = 0; r < count; ++r) {
    const auto name_len = read_le<std::uint32_t>(in);
    if (name_len > 4096) throw Error(ErrorCode::kMetadata, "implausible array name length");
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) throw Error(ErrorCode::kTruncated, "truncated record name");
    const auto rank = read_le<std::uint64_t>(in);
    if (rank > kMaxRank) throw Error(ErrorCode::kMetadata, "array '" + name + "' has rank " + std::to_string(rank));
    Shape shape(rank);
    std::uintmax_t n = 1;
    for (auto& e : shape) {
      e = read_le<std::uint64_t>(in);
      if (e == 0) throw Error(ErrorCode::kMetadata, "array '" + name + "' has a zero extent");
      n *= e;
    }
    const auto pos = static_cast<std::uintmax_t>(in.tellg());
    if (n > file_bytes || pos + n * width > file_bytes) {
      throw Error(ErrorCode::kTruncated, "truncated payload for '" + name + "': needs " +
                                             std::to_string(n * width) + " bytes");
    }
    Array<T> a(shape);
    if (width == 4) {
      read_payload<float>(in, a);
    } else {
      read_payload<double>(in, a);
    }
    if (!ck.arrays.emplace(name, std::move(a)).second) {
      throw Error(ErrorCode::kMetadata, "duplicate array '" + name + "'");
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw Error(ErrorCode::kMetadata, "trailing bytes after " + std::to_string(count) + " arrays");
  }
  return ck;
}

json model_config_to_json(const ModelConfig& c) {
  return json{{"dims", c.dims},
              {"d", c.d},
              {"heads", c.heads},
              {"n_enc", c.n_enc},
              {"n_mod", c.n_mod},
              {"c", c.c},
              {"j", c.j},
              {"patch_small", c.patch_small},
              {"patch_large", c.patch_large},
              {"pe_dim", c.pe_dim},
              {"lff_features", c.lff_features},
              {"lff_dim", c.lff_dim},
              {"lff_scale", c.lff_scale},
              {"lff_trainable", c.lff_trainable},
              {"use_attention", c.ablation.use_attention},
              {"shift_in_film", c.ablation.shift_in_film},
              {"multiscale", c.ablation.multiscale},
              {"t_norm", c.t_norm},
              {"seed", c.seed}};
}

ModelConfig model_config_from_json(const json& j) {
  const std::string w = "model";
  require_known_keys(j,
                     {"dims", "d", "heads", "n_enc", "n_mod", "c", "j", "patch_small", "patch_large",
                      "pe_dim", "lff_features", "lff_dim", "lff_scale", "lff_trainable", "use_attention",
                      "shift_in_film", "multiscale", "t_norm", "seed"},
                     w);
  ModelConfig c;
  read_opt(j, "dims", c.dims, w);
  read_opt(j, "d", c.d, w);
  read_opt(j, "heads", c.heads, w);
  read_opt(j, "n_enc", c.n_enc, w);
  read_opt(j, "n_mod", c.n_mod, w);
  read_opt(j, "c", c.c, w);
  read_opt(j, "j", c.j, w);
  read_opt(j, "patch_small", c.patch_small, w);
  read_opt(j, "patch_large", c.patch_large, w);
  read_opt(j, "pe_dim", c.pe_dim, w);
  read_opt(j, "lff_features", c.lff_features, w);
  read_opt(j, "lff_dim", c.lff_dim, w);
  read_opt(j, "lff_scale", c.lff_scale, w);
  read_opt(j, "lff_trainable", c.lff_trainable, w);
  read_opt(j, "use_attention", c.ablation.use_attention, w);
  read_opt(j, "shift_in_film", c.ablation.shift_in_film, w);
  read_opt(j, "multiscale", c.ablation.multiscale, w);
  read_opt(j, "t_norm", c.t_norm, w);
  read_opt(j, "seed", c.seed, w);
  c.validate();
  return c;
}

template <typename T>
void save_model(const std::filesystem::path& path, const ParameterStore<T>& store, const json& extra) {
  json meta = extra;
  meta["model"] = model_config_to_json(store.config);
  meta["t_norm"] = store.config.t_norm;
  meta["frozen"] = store.frozen;
  ParamMap<T> arrays;
  for (const auto& [k, v] : store.params) arrays.emplace("param/" + k, v);
  write_checkpoint(path, std::move(meta), arrays);
}

template <typename T>
ParameterStore<T> store_from_checkpoint(const CheckpointData<T>& ck) {
  ParameterStore<T> store;
  try {
    store.config = model_config_from_json(ck.meta.at("model"));
    store.frozen = ck.meta.value("frozen", std::set<std::string>{});
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMetadata, std::string("checkpoint model metadata: ") + e.what());
  }
  for (const auto& [name, shape] : parameter_layout(store.config)) {
    auto it = ck.arrays.find("param/" + name);
    if (it == ck.arrays.end()) throw Error(ErrorCode::kMetadata, "checkpoint lacks parameter '" + name + "'");
    if (it->second.shape() != shape) {
      throw Error(ErrorCode::kMetadata, "parameter '" + name + "' has shape " +
                                            shape_string(it->second.shape()) + ", config implies " +
                                            shape_string(shape));
    }
    store.params.emplace(name, it->second);
  }
  return store;
}

template <typename T>
ParameterStore<T> load_model(const std::filesystem::path& path, json* meta) {
  auto ck = read_checkpoint<T>(path);
  auto store = store_from_checkpoint(ck);
  if (meta) *meta = std::move(ck.meta);
  return store;
}

#define VCNEF_INSTANTIATE_CHECKPOINT(T)                                                        \
  template void write_checkpoint<T>(const std::filesystem::path&, json, const ParamMap<T>&);   \
  template CheckpointData<T> read_checkpoint<T>(const std::filesystem::path&);                 \
  template void save_model<T>(const std::filesystem::path&, const ParameterStore<T>&, const json&); \
  template ParameterStore<T> load_model<T>(const std::filesystem::path&, json*);               \
  template ParameterStore<T> store_from_checkpoint<T>(const CheckpointData<T>&);

VCNEF_INSTANTIATE_CHECKPOINT(float)
VCNEF_INSTANTIATE_CHECKPOINT(double)

}  // namespace vcnef
