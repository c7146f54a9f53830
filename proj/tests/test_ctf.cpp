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

#include "derev/ctf.hpp"
#include "derev/dsp.hpp"
#include "doctest.h"
#include "test_support.hpp"

namespace derev {
namespace {

using testing::noise_waveform;

RirFilter delay_rir(Index lag, Index length) {
  RirFilter h;
  h.taps = RealVector::Zero(length);
  h.taps[lag] = 1.0;
  h.early_len = 1;
  return h;
}

CtfFilter single_tap(Index bins, Index taps, Index p0, Complex value) {
  CtfFilter ctf;
  ctf.coeffs = ComplexGrid::Zero(bins, taps);
  ctf.coeffs.col(p0).setConstant(value);
  return ctf;
}

double interior_error(const ComplexGrid& a, const ComplexGrid& b, Index margin) {
  const Index n = a.cols() - 2 * margin;
  return (a.middleCols(margin, n) - b.middleCols(margin, n)).norm() / b.middleCols(margin, n).norm();
}

TEST_CASE("ctf_num_taps: frame taps spanning the RIR plus one window") {
  const StftConfig config;
  CHECK(ctf_num_taps(8000, config) == 53);
  CHECK(ctf_num_taps(1, config) == 3);
  CHECK(ctf_num_taps(160, config) == 4);
}

TEST_CASE("ctf_from_rir: unit impulse maps to the identity") {
  const CtfFilter ctf = ctf_from_rir(delay_rir(0, 8000));
  CHECK(ctf.num_taps() == 53);
  CHECK(ctf.num_bins() == 257);
  CHECK((ctf.coeffs.col(0).array() - Complex(1.0, 0.0)).abs().maxCoeff() < 1e-14);
  CHECK(ctf.coeffs.rightCols(52).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("ctf_from_rir: hop-multiple delay concentrates at its tap") {
  for (Index p0 : {1, 4, 20}) {
    const CtfFilter ctf = ctf_from_rir(delay_rir(p0 * 160, 8000));
    RealGrid kernel = ctf_magnitude_kernel(ctf);
    CHECK((kernel.col(p0).array() - 1.0).abs().maxCoeff() < 1e-14);
    kernel.col(p0).setZero();
    CHECK(kernel.cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("ctf_convolve: identity and single-tap shift") {
  const SpectralFrameSet s = stft(noise_waveform(8000, 1));
  const SpectralFrameSet same = ctf_convolve(s, single_tap(257, 5, 0, 1.0));
  CHECK(same.coeffs == s.coeffs);
  const SpectralFrameSet shifted = ctf_convolve(s, single_tap(257, 5, 3, 1.0));
  CHECK(shifted.coeffs.leftCols(3).cwiseAbs().maxCoeff() == 0.0);
  CHECK(shifted.coeffs.rightCols(s.num_frames() - 3) == s.coeffs.leftCols(s.num_frames() - 3));
  CHECK_THROWS_AS(ctf_convolve(s, single_tap(129, 5, 0, 1.0)), DataError);
}

TEST_CASE("ctf_convolve: conjugated taps follow the Y = sum H* S convention") {
  const SpectralFrameSet s = stft(noise_waveform(3000, 2));
  const Complex h(0.3, 0.8);
  const SpectralFrameSet y = ctf_convolve(s, single_tap(257, 1, 0, h));
  CHECK((y.coeffs - std::conj(h) * s.coeffs).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("ctf_convolve is linear in the spectrum and in the filter") {
  const SpectralFrameSet a = stft(noise_waveform(4000, 3)), b = stft(noise_waveform(4000, 4));
  CtfFilter h1, h2;
  h1.coeffs = ComplexGrid::Random(257, 6);
  h2.coeffs = ComplexGrid::Random(257, 6);
  SpectralFrameSet mix = a;
  mix.coeffs = 2.0 * a.coeffs - 0.5 * b.coeffs;
  const ComplexGrid lhs = ctf_convolve(mix, h1).coeffs;
  const ComplexGrid rhs = 2.0 * ctf_convolve(a, h1).coeffs - 0.5 * ctf_convolve(b, h1).coeffs;
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-10);
  CtfFilter sum;
  sum.coeffs = h1.coeffs + h2.coeffs;
  const ComplexGrid split = ctf_convolve(a, h1).coeffs + ctf_convolve(a, h2).coeffs;
  CHECK((ctf_convolve(a, sum).coeffs - split).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("CTF model is exact for hop-multiple delays") {
  const Waveform s = noise_waveform(16000, 5);
  for (Index p0 : {0, 1, 2, 7}) {
    const RirFilter h = delay_rir(p0 * 160, 2000);
    const Waveform delayed{convolve(s.samples, h.taps).head(s.size()), s.sample_rate};
    const SpectralFrameSet model = ctf_convolve(stft(s), ctf_from_rir(h));
    const SpectralFrameSet truth = stft(delayed);
    // Frames before p0 would need signal from before time zero.
    const Index n = truth.num_frames() - p0 - 3;
    const double err = (model.coeffs.middleCols(p0, n) - truth.coeffs.middleCols(p0, n)).norm() /
                       truth.coeffs.middleCols(p0, n).norm();
    CHECK(err <= 1e-9);
  }
}

TEST_CASE("ctf_magnitude_kernel is nonnegative; two equal taps sum to 2") {
  CtfFilter ctf;
  ctf.coeffs = ComplexGrid::Random(257, 9);
  CHECK(ctf_magnitude_kernel(ctf).minCoeff() >= 0.0);
  CtfFilter two = single_tap(257, 4, 0, Complex(0.6, 0.8));
  two.coeffs.col(2).setConstant(Complex(-1.0, 0.0));
  const RealVector row_sums = ctf_magnitude_kernel(two).rowwise().sum();
  CHECK((row_sums.array() - 2.0).abs().maxCoeff() < 1e-15);
}

TEST_CASE("CTF approximation error on a simulated short RIR is finite") {
  RoomSpec room;
  room.rt60 = 0.1;
  room.dimensions = {3.0, 3.0, 2.5};
  room.source = {1.0, 1.0, 1.2};
  room.mic = {2.0, 1.7, 1.3};
  const RirFilter h = simulate_rir(room);
  REQUIRE(h.size() <= 4 * 400);
  const Waveform s = noise_waveform(16000, 6);
  const ReverbParts y = convolve_static(s, h);
  const double err = interior_error(ctf_convolve(stft(s), ctf_from_rir(h)).coeffs, stft(y.y).coeffs, 12);
  MESSAGE("CTF relative spectrogram error: " << err);
  CHECK(std::isfinite(err));
}

}  // namespace
}  // namespace derev
