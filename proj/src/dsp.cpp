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

#include "derev/dsp.hpp"

#include <unsupported/Eigen/FFT>
#include <cmath>
#include <numbers>

namespace derev {

void validate(const Waveform& x) {
  if (x.samples.size() == 0) throw DataError("waveform is empty");
  if (!(x.sample_rate > 0.0)) throw DataError("waveform sample rate must be positive");
  if (!x.samples.allFinite()) throw DataError("waveform contains non-finite samples");
}

void validate(const StftConfig& config) {
  if (config.window_len < 2) throw ConfigError("window_len must be at least 2");
  if (config.hop <= 0 || config.hop > config.window_len || config.window_len > config.fft_len) {
    throw ConfigError("STFT config requires 0 < hop <= window_len <= fft_len");
  }
  if ((overlap_window_power(config).array() <= 0.0).any()) {
    throw ConfigError("squared-window overlap sum vanishes; perfect reconstruction impossible");
  }
}

RealVector make_window(const StftConfig& config) {
  if (config.window_len < 2) throw ConfigError("window_len must be at least 2");
  const auto n = static_cast<double>(config.window_len);
  RealVector w(config.window_len);
  for (Index i = 0; i < config.window_len; ++i) {
    w[i] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / n);
  }
  return w;
}

RealVector overlap_window_power(const StftConfig& config) {
  const RealVector w = make_window(config);
  RealVector sum = RealVector::Zero(config.hop);
  for (Index i = 0; i < config.window_len; ++i) sum[i % config.hop] += w[i] * w[i];
  return sum;
}

SpectralFrameSet stft(const Waveform& x, const StftConfig& config) {
  validate(config);
  if (x.samples.size() == 0) throw DataError("stft of an empty waveform");
  const Index n = x.samples.size();
  const Index frames = (n + config.hop - 1) / config.hop;
  const RealVector w = make_window(config);

  SpectralFrameSet out;
  out.config = config;
  out.num_samples = n;
  out.sample_rate = x.sample_rate;
  out.coeffs.resize(config.num_bins(), frames);

  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  RealVector buffer(config.fft_len);
  Eigen::VectorXcd spectrum;
  for (Index l = 0; l < frames; ++l) {
    buffer.setZero();
    const Index start = l * config.hop;
    const Index count = std::min(config.window_len, n - start);
    buffer.head(count) = x.samples.segment(start, count).cwiseProduct(w.head(count));
    fft.fwd(spectrum, buffer);
    out.coeffs.col(l) = spectrum.head(config.num_bins());
  }
  return out;
}

Waveform istft(const SpectralFrameSet& spectrum) {
  const StftConfig& config = spectrum.config;
  validate(config);
  if (spectrum.num_bins() != config.num_bins()) {
    throw DataError("spectrum bin count does not match its STFT config");
  }
  const Index frames = spectrum.num_frames();
  const Index span = frames == 0 ? 0 : (frames - 1) * config.hop + config.window_len;
  const RealVector w = make_window(config);

  RealVector acc = RealVector::Zero(span);
  RealVector norm = RealVector::Zero(span);
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  RealVector frame;
  Eigen::VectorXcd half;
  for (Index l = 0; l < frames; ++l) {
    half = spectrum.coeffs.col(l);
    fft.inv(frame, half, config.fft_len);
    const Index start = l * config.hop;
    acc.segment(start, config.window_len) += frame.head(config.window_len).cwiseProduct(w);
    norm.segment(start, config.window_len) += w.cwiseAbs2();
  }

  Waveform out;
  out.sample_rate = spectrum.sample_rate;
  const Index n = spectrum.num_samples > 0 ? std::min(spectrum.num_samples, span) : span;
  out.samples = acc.head(n).cwiseQuotient(norm.head(n));
  return out;
}

RealGrid magnitude(const SpectralFrameSet& spectrum) { return spectrum.coeffs.cwiseAbs(); }

FeatureMatrix lps(const SpectralFrameSet& spectrum) {
  return {spectrum.coeffs.cwiseAbs2().cwiseMax(kPowerFloor).array().log().matrix()};
}

RealGrid stack_multiframe(const FeatureMatrix& features, Index frame, Index context) {
  if (context <= 0 || context % 2 == 0) throw ConfigError("multi-frame context length must be odd");
  const RealGrid& v = features.values;
  const Index half = (context - 1) / 2;
  RealGrid out = RealGrid::Zero(v.rows(), context);
  for (Index j = 0; j < context; ++j) {
    const Index src = frame - half + j;
    if (src >= 0 && src < v.cols()) out.col(j) = v.col(src);
  }
  return out;
}

}  // namespace derev
