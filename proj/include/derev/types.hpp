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

#include <Eigen/Core>
#include <complex>

#include "derev/error.hpp"

namespace derev {

using Eigen::Index;
using RealVector = Eigen::VectorXd;
using RealGrid = Eigen::MatrixXd;     // rows = frequency bins, cols = frames
using ComplexGrid = Eigen::MatrixXcd;  // rows = frequency bins, cols = frames
using Complex = std::complex<double>;

constexpr double kDefaultSampleRate = 16000.0;

// Mono sampled signal. Samples are nominally in [-1, 1].
struct Waveform {
  RealVector samples;
  double sample_rate = kDefaultSampleRate;

  Index size() const { return samples.size(); }
  double duration() const { return static_cast<double>(samples.size()) / sample_rate; }
};

// Throws DataError unless the waveform is non-empty, finite and has a
// positive sample rate.
void validate(const Waveform& x);

enum class WindowKind { kHamming };

struct StftConfig {
  Index window_len = 400;
  Index hop = 160;
  Index fft_len = 512;
  WindowKind window_kind = WindowKind::kHamming;

  Index num_bins() const { return fft_len / 2 + 1; }
  bool operator==(const StftConfig&) const = default;
};

// Throws ConfigError if 0 < hop <= window_len <= fft_len fails or the
// shifted squared-window sum vanishes anywhere.
void validate(const StftConfig& config);

// One-sided STFT coefficient grid, K = fft_len/2 + 1 rows by L frame columns.
struct SpectralFrameSet {
  ComplexGrid coeffs;
  StftConfig config;
  // Length of the analysed waveform; istft() trims to it.
  Index num_samples = 0;
  double sample_rate = kDefaultSampleRate;

  Index num_bins() const { return coeffs.rows(); }
  Index num_frames() const { return coeffs.cols(); }
};

// Log-power-spectrum features v_kl, K rows by L columns.
struct FeatureMatrix {
  RealGrid values;
};

}  // namespace derev
