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

#include <cmath>
#include <numbers>
#include <numeric>
#include <unsupported/Eigen/FFT>

#include "derev/metrics.hpp"

namespace derev {
namespace {

constexpr int kRate = 10000;
constexpr Index kFrameLen = 256;
constexpr Index kFftLen = 512;
constexpr Index kHop = kFrameLen / 2;
constexpr int kBands = 15;
constexpr double kMinFreq = 150.0;
constexpr Index kSegment = 30;  // frames, 384 ms at 10 kHz
constexpr double kDynamicRange = 40.0;
constexpr double kEps = 1e-12;

// Hann window without its zero endpoints.
RealVector hann_inner(Index n) {
  RealVector w(n);
  for (Index i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i + 1) / static_cast<double>(n + 1));
  }
  return w;
}

// Frame starts 0, hop, ... strictly below len - frame_len.
Index frame_count(Index len) { return len > kFrameLen ? (len - kFrameLen - 1) / kHop + 1 : 0; }

void remove_silent_frames(const RealVector& x, const RealVector& y, RealVector& x_out, RealVector& y_out) {
  const RealVector w = hann_inner(kFrameLen);
  const Index frames = frame_count(x.size());
  RealVector energy(frames);
  for (Index f = 0; f < frames; ++f) {
    energy[f] = 20.0 * std::log10(x.segment(f * kHop, kFrameLen).cwiseProduct(w).norm() + 1e-16);
  }
  const double loudest = frames > 0 ? energy.maxCoeff() : 0.0;
  std::vector<Index> keep;
  for (Index f = 0; f < frames; ++f) {
    if (loudest - kDynamicRange - energy[f] < 0.0) keep.push_back(f);
  }
  const auto kept = static_cast<Index>(keep.size());
  const Index len = kept > 0 ? (kept - 1) * kHop + kFrameLen : 0;
  x_out = RealVector::Zero(len);
  y_out = RealVector::Zero(len);
  for (Index i = 0; i < kept; ++i) {
    const Index src = keep[static_cast<std::size_t>(i)] * kHop;
    x_out.segment(i * kHop, kFrameLen) += x.segment(src, kFrameLen).cwiseProduct(w);
    y_out.segment(i * kHop, kFrameLen) += y.segment(src, kFrameLen).cwiseProduct(w);
  }
}

// One-third-octave band envelopes: bands x frames.
RealGrid band_envelopes(const RealVector& x) {
  const RealVector w = hann_inner(kFrameLen);
  const Index frames = frame_count(x.size());
  const Index bins = kFftLen / 2 + 1;
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  RealGrid power(bins, frames);
  RealVector frame(kFftLen);
  Eigen::VectorXcd spec;
  for (Index f = 0; f < frames; ++f) {
    frame.setZero();
    frame.head(kFrameLen) = x.segment(f * kHop, kFrameLen).cwiseProduct(w);
    fft.fwd(spec, frame);
    power.col(f) = spec.head(bins).cwiseAbs2();
  }
  // Band edges snap to the nearest FFT bin.
  const auto nearest = [&](double hz) {
    return static_cast<Index>(std::lround(hz / (static_cast<double>(kRate) / static_cast<double>(kFftLen))));
  };
  RealGrid env(kBands, frames);
  for (int b = 0; b < kBands; ++b) {
    const Index lo = nearest(kMinFreq * std::pow(2.0, (2.0 * b - 1.0) / 6.0));
    const Index hi = std::min(bins, nearest(kMinFreq * std::pow(2.0, (2.0 * b + 1.0) / 6.0)));
    env.row(b) = power.middleRows(lo, hi - lo).colwise().sum().cwiseSqrt();
  }
  return env;
}

// Zero-mean, unit-norm rows, then the same for columns.
RealGrid row_column_normalize(RealGrid m) {
  m.colwise() -= m.rowwise().mean();
  const RealVector rn = m.rowwise().norm();
  for (Index i = 0; i < m.rows(); ++i) m.row(i) /= std::max(rn[i], kEps);
  m.rowwise() -= m.colwise().mean();
  const Eigen::RowVectorXd cn = m.colwise().norm();
  for (Index j = 0; j < m.cols(); ++j) m.col(j) /= std::max(cn[j], kEps);
  return m;
}

double bessel_i0(double x) { return std::cyl_bessel_i(0.0, x); }

}  // namespace

RealVector resample(const RealVector& x, int up, int down) {
  if (up < 1 || down < 1) throw ConfigError("resampling factors must be positive");
  const int g = std::gcd(up, down);
  up /= g;
  down /= g;
  if (up == 1 && down == 1) return x;
  const double cutoff = 1.0 / (2.0 * std::max(up, down));
  const double rolloff = cutoff / 10.0;
  constexpr double rejection_db = 60.0;
  const auto half = static_cast<Index>(std::ceil((rejection_db - 8.0) / (28.714 * rolloff)));
  const double beta = 0.1102 * (rejection_db - 8.7);
  RealVector h(2 * half + 1);
  for (Index i = 0; i < h.size(); ++i) {
    const double t = static_cast<double>(i - half);
    const double arg = 2.0 * cutoff * t;
    const double sinc = arg == 0.0 ? 1.0 : std::sin(std::numbers::pi * arg) / (std::numbers::pi * arg);
    const double r = t / static_cast<double>(half);
    h[i] = 2.0 * up * cutoff * sinc * bessel_i0(beta * std::sqrt(std::max(0.0, 1.0 - r * r))) / bessel_i0(beta);
  }
  const Index out_len = (x.size() * up + down - 1) / down;
  RealVector y = RealVector::Zero(out_len);
  for (Index j = 0; j < out_len; ++j) {
    // Upsampled time j*down; input sample n sits at n*up.
    const Index t = j * down;
    const Index n_lo = std::max<Index>(0, (t - half + up - 1) / up);
    const Index n_hi = std::min<Index>(x.size() - 1, (t + half) / up);
    double acc = 0.0;
    for (Index n = n_lo; n <= n_hi; ++n) acc += x[n] * h[t - n * up + half];
    y[j] = acc;
  }
  return y;
}

double estoi(const Waveform& estimate, const Waveform& reference) {
  if (estimate.sample_rate != reference.sample_rate) throw DataError("ESTOI inputs have different sample rates");
  const Index n = std::min(estimate.size(), reference.size());
  const auto rate = static_cast<int>(std::lround(reference.sample_rate));
  if (static_cast<double>(rate) != reference.sample_rate) throw DataError("ESTOI needs an integer sample rate");
  const RealVector x = resample(reference.samples.head(n), kRate, rate);
  const RealVector y = resample(estimate.samples.head(n), kRate, rate);
  RealVector xs, ys;
  remove_silent_frames(x, y, xs, ys);
  const RealGrid xe = band_envelopes(xs);
  const RealGrid ye = band_envelopes(ys);
  if (xe.cols() < kSegment) {
    throw DataError("ESTOI needs at least " + std::to_string(kSegment) +
                    " active frames (about 0.4 s of speech after silence removal)");
  }
  double total = 0.0;
  const Index segments = xe.cols() - kSegment + 1;
  for (Index m = 0; m < segments; ++m) {
    const RealGrid xn = row_column_normalize(xe.middleCols(m, kSegment));
    const RealGrid yn = row_column_normalize(ye.middleCols(m, kSegment));
    total += xn.cwiseProduct(yn).sum() / static_cast<double>(kSegment);
  }
  return total / static_cast<double>(segments);
}

}  // namespace derev
