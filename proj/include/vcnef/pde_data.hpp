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

// Desk-scale 1D advection / Burgers datasets: initial conditions, reference
// solvers and the VCNF container format.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vcnef/array.hpp"

namespace vcnef {

struct SineMode {
  double amplitude = 0.0;
  int wavenumber = 1;  // n_i >= 1
  double phase = 0.0;  // [0, 2pi)
};

/// u0(x) = sum_i A_i sin(2 pi n_i x / L + phi_i). Exact at any real x.
struct SinusoidalIC {
  std::vector<SineMode> modes;
  double length = 2.0;

  double operator()(double x) const;
  /// Upper bound of |u0| (and of |u| for Burgers by the maximum principle).
  double amplitude_bound() const;
};

struct IcConfig {
  int modes = 5;
  int max_mode = 8;
  double amp_min = -0.5;
  double amp_max = 0.5;
  double length = 2.0;
};

SinusoidalIC sample_ic(std::uint64_t seed, const IcConfig& config);

/// Affine map between the physical domain [x_min, x_min + length) and the
/// model's unit interval.
struct DomainMap {
  double x_min = -1.0;
  double length = 2.0;

  double to_unit(double x) const { return (x - x_min) / length; }
  double to_physical(double u) const { return x_min + u * length; }
};

/// Periodic node grid x_i = x_min + i * length / s, i < s.
std::vector<double> periodic_grid(const DomainMap& domain, std::size_t s);

struct Trajectory {
  Array<double> values;        // [N_t, s, c]
  std::vector<double> times;   // t_0 = 0 < t_1 < ...
  Array<double> grid;          // [s, D], physical coordinates
  std::vector<double> params;  // PDE parameters p

  std::size_t nt() const { return values.dim(0); }
  std::size_t s() const { return values.dim(1); }
  std::size_t c() const { return values.dim(2); }
  /// Frame k as [s, c].
  Array<double> frame(std::size_t k) const;
};

/// Exact translation u(t, x) = u0(x - beta t), evaluated per mode.
Trajectory solve_advection(const SinusoidalIC& ic, double beta, const std::vector<double>& times,
                           const std::vector<double>& grid);

struct BurgersGrid {
  std::size_t s = 256;
  DomainMap domain;
};

/// Largest admissible step for solve_burgers that divides `output_dt`.
double burgers_stable_dt(const SinusoidalIC& ic, double nu, const BurgersGrid& grid,
                         double output_dt);

/// u_t + (u^2/2)_x = (nu/pi) u_xx on a periodic grid. Finite volumes with a
/// Rusanov flux on reconstructed states, central diffusion and SSP-RK2 in
/// time. Every requested time must be a multiple of `dt`.
Trajectory solve_burgers(const SinusoidalIC& ic, double nu, const BurgersGrid& grid, double dt,
                         const std::vector<double>& times);

/// dx * sum_i u_i for frame k.
double discrete_integral(const Trajectory& traj, std::size_t k, double dx);

struct DatasetMeta {
  std::string pde;  // "advection" | "burgers"
  std::size_t nt = 0;
  std::size_t s = 0;
  std::size_t c = 1;
  std::size_t dims = 1;
  std::vector<std::size_t> extents;  // spatial lattice, product == s
  std::vector<double> times;
  DomainMap domain;
  std::uint64_t seed = 0;
  std::string config_hash;
  double dt() const { return times.size() > 1 ? times[1] - times[0] : 0.0; }
  double dx() const { return domain.length / static_cast<double>(extents.empty() ? s : extents[0]); }
};

struct Dataset {
  DatasetMeta meta;
  std::vector<Trajectory> samples;

  std::size_t size() const { return samples.size(); }
};

struct DataConfig {
  std::string pde = "advection";
  std::size_t n_samples = 512;
  std::size_t s = 64;
  std::size_t nt = 21;
  double t_final = 2.0;
  std::vector<double> params{0.4};
  IcConfig ic;
  double x_min = -1.0;
  std::size_t solver_s = 0;  // 0: 4*s for Burgers, s for advection
  double dt_solver = 0.0;    // 0: largest stable step
};

/// Sample i uses IC seed derive_seed(seed, i) and parameter
/// params[i % params.size()]. Values are rounded to float32, the storage
/// precision of the container format.
Dataset generate_dataset(const DataConfig& config, std::uint64_t seed);

/// Keeps every `spatial`-th grid point and every `temporal`-th frame.
Dataset subsample(const Dataset& d, std::size_t spatial, std::size_t temporal);

/// Container: "VCNF" | u32 version | u64 metadata length | JSON metadata |
/// float32 payload [N, N_t, s, c], all little-endian.
inline constexpr std::uint32_t kDatasetVersion = 1;
std::size_t write_dataset(const Dataset& d, const std::filesystem::path& path);
Dataset read_dataset(const std::filesystem::path& path);
/// Byte count of everything before the payload.
std::size_t dataset_header_size(const std::filesystem::path& path);

}  // namespace vcnef
