// Copyright 2026 The Derev Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "derev/nn/grid.hpp"
#include "derev/types.hpp"

namespace derev::testing {

inline RealVector white_noise(Index n, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, scale);
  RealVector x(n);
  for (Index i = 0; i < n; ++i) x[i] = dist(rng);
  return x;
}

inline Waveform noise_waveform(Index n, std::uint64_t seed, double scale = 0.1) {
  return {white_noise(n, seed, scale), kDefaultSampleRate};
}

template <typename Scalar = double>
nn::Grid3<Scalar> random_grid(Index c, Index k, Index l, std::uint64_t seed, double scale = 1.0) {
  nn::Grid3<Scalar> g(c, k, l);
  const RealVector v = white_noise(g.values.size(), seed, scale);
  for (Index i = 0; i < v.size(); ++i) g.values.data()[i] = static_cast<Scalar>(v[i]);
  return g;
}

// Relative RMS error of `a` against reference `b`.
template <typename A, typename B>
double relative_rms(const A& a, const B& b) {
  return (a - b).norm() / b.norm();
}

// True when an analytic and a finite-difference derivative agree to the
// given relative tolerance (or both are at rounding level).
inline bool derivative_matches(double analytic, double numeric, double rel_tol, double abs_floor = 1e-9) {
  const double diff = std::abs(analytic - numeric);
  return diff <= abs_floor || diff <= rel_tol * std::max(std::abs(analytic), std::abs(numeric));
}

}  // namespace derev::testing
