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

#include <cstring>
#include <fstream>
#include <json.hpp>

#include "vcnef/binary_io.hpp"
#include "vcnef/error.hpp"
#include "vcnef/pde_data.hpp"

namespace vcnef {
namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'V', 'C', 'N', 'F'};

json meta_to_json(const Dataset& d) {
  json params = json::array();
  for (const auto& tr : d.samples) params.push_back(tr.params);
  return json{{"pde", d.meta.pde},
              {"N", d.samples.size()},
              {"N_t", d.meta.nt},
              {"s", d.meta.s},
              {"c", d.meta.c},
              {"D", d.meta.dims},
              {"extents", d.meta.extents},
              {"times", d.meta.times},
              {"params", params},
              {"seed", d.meta.seed},
              {"domain", {{"x_min", d.meta.domain.x_min}, {"length", d.meta.domain.length}}},
              {"config_hash", d.meta.config_hash}};
}

[[noreturn]] void metadata_error(const std::string& what) {
  throw Error(ErrorCode::kMetadata, "metadata mismatch: " + what);
}

struct Header {
  json meta;
  std::size_t size = 0;
};

Header read_header(std::istream& in, const std::filesystem::path& path) {
  char magic[4];
  if (!in.read(magic, 4)) throw Error(ErrorCode::kTruncated, "truncated header: " + path.string());
  if (std::memcmp(magic, kMagic, 4) != 0) throw Error(ErrorCode::kBadMagic, "bad magic: " + path.string());
  const auto version = read_le<std::uint32_t>(in);
  if (version != kDatasetVersion) {
    throw Error(ErrorCode::kVersion, "unsupported dataset version " + std::to_string(version));
  }
  const auto len = read_le<std::uint64_t>(in);
  std::string text(len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(len))) {
    throw Error(ErrorCode::kTruncated, "truncated metadata: " + path.string());
  }
  Header h;
  try {
    h.meta = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMetadata, std::string("metadata is not valid JSON: ") + e.what());
  }
  h.size = 4 + 4 + 8 + len;
  return h;
}

}  // namespace

std::size_t write_dataset(const Dataset& d, const std::filesystem::path& path) {
  const std::size_t nt = d.meta.nt, s = d.meta.s, c = d.meta.c;
  for (const auto& tr : d.samples) {
    if (tr.values.shape() != Shape{nt, s, c}) {
      throw Error(ErrorCode::kShape, "trajectory shape " + shape_string(tr.values.shape()) +
                                         " does not match dataset [" + std::to_string(nt) + ", " +
                                         std::to_string(s) + ", " + std::to_string(c) + "]");
    }
  }
  const std::string text = meta_to_json(d).dump();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot open for writing: " + path.string());
  out.write(kMagic, 4);
  write_le<std::uint32_t>(out, kDatasetVersion);
  write_le<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  std::vector<float> buf(nt * s * c);
  for (const auto& tr : d.samples) {
    auto src = tr.values.data();
    for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = static_cast<float>(src[i]);
    write_le_floats(out, buf);
  }
  out.flush();
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path.string());
  return 16 + text.size() + 4 * buf.size() * d.samples.size();
}

std::size_t dataset_header_size(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open: " + path.string());
  return read_header(in, path).size;
}

Dataset read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open: " + path.string());
  const Header h = read_header(in, path);
  const json& m = h.meta;

  Dataset d;
  std::size_t n = 0;
  std::vector<std::vector<double>> params;
  try {
    d.meta.pde = m.at("pde").get<std::string>();
    n = m.at("N").get<std::size_t>();
    d.meta.nt = m.at("N_t").get<std::size_t>();
    d.meta.s = m.at("s").get<std::size_t>();
    d.meta.c = m.at("c").get<std::size_t>();
    d.meta.dims = m.at("D").get<std::size_t>();
    d.meta.extents = m.at("extents").get<std::vector<std::size_t>>();
    d.meta.times = m.at("times").get<std::vector<double>>();
    params = m.at("params").get<std::vector<std::vector<double>>>();
    d.meta.seed = m.at("seed").get<std::uint64_t>();
    d.meta.domain.x_min = m.at("domain").at("x_min").get<double>();
    d.meta.domain.length = m.at("domain").at("length").get<double>();
    d.meta.config_hash = m.value("config_hash", std::string{});
  } catch (const json::exception& e) {
    metadata_error(e.what());
  }
  if (d.meta.nt == 0 || d.meta.s == 0 || d.meta.c == 0) metadata_error("zero extent");
  if (d.meta.times.size() != d.meta.nt) metadata_error("times has " + std::to_string(d.meta.times.size()) + " entries, N_t=" + std::to_string(d.meta.nt));
  if (params.size() != n) metadata_error("params has " + std::to_string(params.size()) + " rows, N=" + std::to_string(n));
  if (d.meta.dims != 1 || d.meta.extents != std::vector<std::size_t>{d.meta.s}) {
    metadata_error("only 1D lattices with extents == [s] are stored");
  }

  const std::size_t frame = d.meta.nt * d.meta.s * d.meta.c;
  const auto payload_bytes = static_cast<std::uintmax_t>(4) * frame * n;
  const auto file_bytes = std::filesystem::file_size(path);
  if (file_bytes < h.size + payload_bytes) {
    throw Error(ErrorCode::kTruncated, "truncated payload: expected " + std::to_string(payload_bytes) +
                                           " bytes, found " + std::to_string(file_bytes - h.size));
  }
  if (file_bytes > h.size + payload_bytes) {
    metadata_error("payload has " + std::to_string(file_bytes - h.size) + " bytes, metadata implies " +
                   std::to_string(payload_bytes));
  }

  const auto grid = periodic_grid(d.meta.domain, d.meta.s);
  const Array<double> grid_arr({d.meta.s, 1}, std::span<const double>(grid));
  std::vector<float> buf(frame);
  d.samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    read_le_floats(in, buf);
    Array<double> v({d.meta.nt, d.meta.s, d.meta.c});
    auto out = v.mutable_data();
    for (std::size_t j = 0; j < frame; ++j) out[j] = static_cast<double>(buf[j]);
    d.samples.push_back(Trajectory{std::move(v), d.meta.times, grid_arr, params[i]});
  }
  return d;
}

}  // namespace vcnef
