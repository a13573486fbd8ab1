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

#include "vcnef/pde_data.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "vcnef/error.hpp"
#include "vcnef/parallel.hpp"
#include "vcnef/rng.hpp"

namespace vcnef {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kCfl = 0.4;

void check_times(const std::vector<double>& times) {
  if (times.empty() || times[0] != 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "times must start at 0");
  }
  for (std::size_t k = 1; k < times.size(); ++k) {
    if (!(times[k] > times[k - 1])) {
      throw Error(ErrorCode::kInvalidArgument, "times must be strictly increasing");
    }
  }
}

Array<double> grid_array(const std::vector<double>& grid) {
  return Array<double>({grid.size(), 1}, std::span<const double>(grid));
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

// Smoothed van Albada slope; the dx^3 floor keeps it second order at
// smooth extrema.
inline double albada(double a, double b, double eps) {
  return ((a * a + eps) * b + (b * b + eps) * a) / (a * a + b * b + 2.0 * eps);
}

struct BurgersRhs {
  std::size_t n;
  double dx;
  double kappa;
  std::vector<double> slope, flux;

  BurgersRhs(std::size_t n_, double dx_, double kappa_)
      : n(n_), dx(dx_), kappa(kappa_), slope(n_), flux(n_) {}

  // out = -(F_{i+1/2} - F_{i-1/2}) / dx + kappa * (u_{i+1} - 2u_i + u_{i-1}) / dx^2
  void operator()(const std::vector<double>& u, std::vector<double>& out) {
    const double eps = dx * dx * dx;
    for (std::size_t i = 0; i < n; ++i) {
      const double um = u[(i + n - 1) % n], up = u[(i + 1) % n];
      slope[i] = albada(u[i] - um, up - u[i], eps);
    }
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = (i + 1) % n;
      const double ul = u[i] + 0.5 * slope[i];
      const double ur = u[j] - 0.5 * slope[j];
      const double a = std::max(std::abs(ul), std::abs(ur));
      flux[i] = 0.25 * (ul * ul + ur * ur) - 0.5 * a * (ur - ul);
    }
    const double inv_dx = 1.0 / dx, diff = kappa / (dx * dx);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t im = (i + n - 1) % n, ip = (i + 1) % n;
      out[i] = -(flux[i] - flux[im]) * inv_dx + diff * (u[ip] - 2.0 * u[i] + u[im]);
    }
  }
};

}  // namespace

double SinusoidalIC::operator()(double x) const {
  double v = 0.0;
  for (const auto& m : modes) v += m.amplitude * std::sin(kTwoPi * m.wavenumber * x / length + m.phase);
  return v;
}

double SinusoidalIC::amplitude_bound() const {
  double b = 0.0;
  for (const auto& m : modes) b += std::abs(m.amplitude);
  return b;
}

SinusoidalIC sample_ic(std::uint64_t seed, const IcConfig& config) {
  if (config.modes < 1 || config.max_mode < 1 || config.length <= 0.0 ||
      config.amp_min > config.amp_max) {
    throw Error(ErrorCode::kConfig, "invalid initial-condition config");
  }
  std::mt19937_64 rng(seed);
  SinusoidalIC ic;
  ic.length = config.length;
  for (int i = 0; i < config.modes; ++i) {
    SineMode m;
    m.amplitude = uniform(rng, config.amp_min, config.amp_max);
    m.wavenumber = static_cast<int>(uniform_int(rng, 1, static_cast<std::uint64_t>(config.max_mode)));
    m.phase = uniform(rng, 0.0, kTwoPi);
    ic.modes.push_back(m);
  }
  return ic;
}

std::vector<double> periodic_grid(const DomainMap& domain, std::size_t s) {
  std::vector<double> g(s);
  for (std::size_t i = 0; i < s; ++i) {
    g[i] = domain.x_min + domain.length * static_cast<double>(i) / static_cast<double>(s);
  }
  return g;
}

Array<double> Trajectory::frame(std::size_t k) const {
  const std::size_t n = s() * c();
  return Array<double>({s(), c()}, values.data().subspan(k * n, n));
}

Trajectory solve_advection(const SinusoidalIC& ic, double beta, const std::vector<double>& times,
                           const std::vector<double>& grid) {
  check_times(times);
  const std::size_t nt = times.size(), s = grid.size();
  Array<double> values({nt, s, 1});
  auto out = values.mutable_data();
  for (std::size_t k = 0; k < nt; ++k) {
    for (std::size_t i = 0; i < s; ++i) out[k * s + i] = ic(grid[i] - beta * times[k]);
  }
  return Trajectory{std::move(values), times, grid_array(grid), {beta}};
}

double burgers_stable_dt(const SinusoidalIC& ic, double nu, const BurgersGrid& grid,
                         double output_dt) {
  const double dx = grid.domain.length / static_cast<double>(grid.s);
  double limit = kCfl * dx / std::max(ic.amplitude_bound(), 1e-12);
  if (nu > 0.0) limit = std::min(limit, kCfl * dx * dx * std::numbers::pi / (2.0 * nu));
  const double steps = std::ceil(output_dt / limit * (1.0 + 1e-12));
  return output_dt / steps;
}

Trajectory solve_burgers(const SinusoidalIC& ic, double nu, const BurgersGrid& grid, double dt,
                         const std::vector<double>& times) {
  check_times(times);
  if (grid.s < 3 || !(dt > 0.0) || nu < 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "solve_burgers needs s >= 3, dt > 0, nu >= 0");
  }
  const std::size_t n = grid.s;
  const double dx = grid.domain.length / static_cast<double>(n);
  const auto x = periodic_grid(grid.domain, n);

  std::vector<double> u(n);
  double umax = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    u[i] = ic(x[i]);
    umax = std::max(umax, std::abs(u[i]));
  }
  const double adv_bound = kCfl * dx / std::max(umax, 1e-300);
  if (dt > adv_bound) {
    throw Error(ErrorCode::kCfl, "advective CFL violated: dt=" + fmt(dt) +
                                     " > 0.4*dx/max|u|=" + fmt(adv_bound));
  }
  if (nu > 0.0) {
    const double diff_bound = kCfl * dx * dx * std::numbers::pi / (2.0 * nu);
    if (dt > diff_bound) {
      throw Error(ErrorCode::kCfl, "diffusive limit violated: dt=" + fmt(dt) +
                                       " > 0.4*dx^2*pi/(2*nu)=" + fmt(diff_bound));
    }
  }
  std::vector<long long> stops(times.size());
  for (std::size_t k = 0; k < times.size(); ++k) {
    const double r = times[k] / dt;
    stops[k] = std::llround(r);
    if (std::abs(r - static_cast<double>(stops[k])) > 1e-9 * std::max(1.0, r)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "time " + fmt(times[k]) + " is not a multiple of dt=" + fmt(dt));
    }
  }

  const std::size_t nt = times.size();
  Array<double> values({nt, n, 1});
  auto out = values.mutable_data();
  BurgersRhs rhs(n, dx, nu / std::numbers::pi);
  std::vector<double> k1(n), u1(n), k2(n);
  long long step = 0;
  for (std::size_t k = 0; k < nt; ++k) {
    for (; step < stops[k]; ++step) {
      rhs(u, k1);
      for (std::size_t i = 0; i < n; ++i) u1[i] = u[i] + dt * k1[i];
      rhs(u1, k2);
      for (std::size_t i = 0; i < n; ++i) u[i] = 0.5 * (u[i] + u1[i] + dt * k2[i]);
    }
    std::copy(u.begin(), u.end(), out.begin() + static_cast<std::ptrdiff_t>(k * n));
  }
  if (!values.all_finite()) throw Error(ErrorCode::kNonFinite, "solve_burgers diverged");
  return Trajectory{std::move(values), times, grid_array(x), {nu}};
}

double discrete_integral(const Trajectory& traj, std::size_t k, double dx) {
  const std::size_t n = traj.s() * traj.c();
  double sum = 0.0;
  for (double v : traj.values.data().subspan(k * n, n)) sum += v;
  return dx * sum;
}

Dataset generate_dataset(const DataConfig& config, std::uint64_t seed) {
  if (config.pde != "advection" && config.pde != "burgers") {
    throw Error(ErrorCode::kConfig, "unknown pde '" + config.pde + "'");
  }
  if (config.n_samples == 0 || config.s == 0 || config.nt < 2 || config.params.empty() ||
      !(config.t_final > 0.0)) {
    throw Error(ErrorCode::kConfig, "dataset config needs N >= 1, s >= 1, N_t >= 2, params, T > 0");
  }
  const DomainMap domain{config.x_min, config.ic.length};
  std::vector<double> times(config.nt);
  for (std::size_t k = 0; k < config.nt; ++k) {
    times[k] = config.t_final * static_cast<double>(k) / static_cast<double>(config.nt - 1);
  }
  const auto grid = periodic_grid(domain, config.s);
  const bool burgers = config.pde == "burgers";
  const std::size_t solver_s = config.solver_s ? config.solver_s : (burgers ? 4 * config.s : config.s);
  if (burgers && solver_s % config.s != 0) {
    throw Error(ErrorCode::kConfig, "solver resolution must be a multiple of s");
  }
  const std::size_t stride = solver_s / config.s;

  Dataset d;
  d.meta.pde = config.pde;
  d.meta.nt = config.nt;
  d.meta.s = config.s;
  d.meta.extents = {config.s};
  d.meta.times = times;
  d.meta.domain = domain;
  d.meta.seed = seed;
  d.samples.resize(config.n_samples);

  const std::uint64_t data_seed = derive_seed(seed, std::string_view("data"));
  parallel_for(config.n_samples, [&](std::size_t i) {
    const auto ic = sample_ic(derive_seed(data_seed, static_cast<std::uint64_t>(i)), config.ic);
    const double p = config.params[i % config.params.size()];
    Trajectory tr;
    if (!burgers) {
      tr = solve_advection(ic, p, times, grid);
    } else {
      const BurgersGrid bg{solver_s, domain};
      const double dt = config.dt_solver > 0.0 ? config.dt_solver
                                               : burgers_stable_dt(ic, p, bg, times[1] - times[0]);
      Trajectory fine = solve_burgers(ic, p, bg, dt, times);
      Array<double> v({config.nt, config.s, 1});
      auto out = v.mutable_data();
      auto src = fine.values.data();
      for (std::size_t k = 0; k < config.nt; ++k) {
        for (std::size_t j = 0; j < config.s; ++j) out[k * config.s + j] = src[k * solver_s + j * stride];
      }
      tr = Trajectory{std::move(v), times, grid_array(grid), {p}};
    }
    for (auto& v : tr.values.mutable_data()) v = static_cast<double>(static_cast<float>(v));
    d.samples[i] = std::move(tr);
  });
  return d;
}

Dataset subsample(const Dataset& d, std::size_t spatial, std::size_t temporal) {
  if (spatial == 0 || temporal == 0 || d.meta.s % spatial != 0 || (d.meta.nt - 1) % temporal != 0) {
    throw Error(ErrorCode::kInvalidArgument, "subsample factors must divide s and N_t - 1");
  }
  const std::size_t s = d.meta.s / spatial, nt = (d.meta.nt - 1) / temporal + 1, c = d.meta.c;
  Dataset out;
  out.meta = d.meta;
  out.meta.s = s;
  out.meta.nt = nt;
  out.meta.extents = {s};
  out.meta.times.clear();
  for (std::size_t k = 0; k < nt; ++k) out.meta.times.push_back(d.meta.times[k * temporal]);
  for (const auto& tr : d.samples) {
    Array<double> v({nt, s, c});
    Array<double> g({s, tr.grid.dim(1)});
    auto vo = v.mutable_data();
    auto go = g.mutable_data();
    const std::size_t D = tr.grid.dim(1);
    for (std::size_t k = 0; k < nt; ++k) {
      for (std::size_t i = 0; i < s; ++i) {
        for (std::size_t ch = 0; ch < c; ++ch) {
          vo[(k * s + i) * c + ch] = tr.values[((k * temporal) * d.meta.s + i * spatial) * c + ch];
        }
      }
    }
    for (std::size_t i = 0; i < s; ++i) {
      for (std::size_t a = 0; a < D; ++a) go[i * D + a] = tr.grid[i * spatial * D + a];
    }
    out.samples.push_back(Trajectory{std::move(v), out.meta.times, std::move(g), tr.params});
  }
  return out;
}

}  // namespace vcnef
