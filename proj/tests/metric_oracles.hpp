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

// Scalar-loop reference metrics, written against Array::at so they share no
// indexing code with the library.

#include <cmath>
#include <vector>

#include "vcnef/array.hpp"

namespace vcnef::testing {

inline double oracle_nrmse(const Array<double>& y, const Array<double>& p) {
  double acc = 0;
  int terms = 0;
  for (std::size_t t = 0; t < y.dim(0); ++t) {
    for (std::size_t c = 0; c < y.dim(2); ++c) {
      double num = 0, den = 0;
      for (std::size_t x = 0; x < y.dim(1); ++x) {
        num += std::pow(y.at({t, x, c}) - p.at({t, x, c}), 2);
        den += std::pow(y.at({t, x, c}), 2);
      }
      if (den > 0) {
        acc += std::sqrt(num) / std::sqrt(den);
        ++terms;
      }
    }
  }
  return terms ? acc / terms : 0.0;
}

inline double oracle_brmse(const Array<double>& y, const Array<double>& p) {
  double acc = 0;
  const std::size_t last = y.dim(1) - 1;
  for (std::size_t t = 0; t < y.dim(0); ++t) {
    for (std::size_t c = 0; c < y.dim(2); ++c) {
      const double a = y.at({t, 0, c}) - p.at({t, 0, c});
      const double b = y.at({t, last, c}) - p.at({t, last, c});
      acc += std::sqrt((a * a + b * b) / 2);
    }
  }
  return acc / static_cast<double>(y.dim(0) * y.dim(2));
}

inline double oracle_mse(const Array<double>& y, const Array<double>& p) {
  double acc = 0;
  for (std::size_t t = 0; t < y.dim(0); ++t)
    for (std::size_t x = 0; x < y.dim(1); ++x)
      for (std::size_t c = 0; c < y.dim(2); ++c) acc += std::pow(y.at({t, x, c}) - p.at({t, x, c}), 2);
  return acc / static_cast<double>(y.size());
}

inline std::vector<std::vector<double>> oracle_heatmap(const Array<double>& y, const Array<double>& p,
                                                       std::size_t c = 0) {
  std::vector<std::vector<double>> out(y.dim(0), std::vector<double>(y.dim(1)));
  for (std::size_t t = 0; t < y.dim(0); ++t)
    for (std::size_t x = 0; x < y.dim(1); ++x)
      out[t][x] = y.at({t, x, c}) == 0 ? -1.0 : std::fabs(y.at({t, x, c}) - p.at({t, x, c})) / std::fabs(y.at({t, x, c}));
  return out;
}

}  // namespace vcnef::testing
