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

#include "derev/dsp.hpp"
#include "derev/inverse_filter.hpp"
#include "doctest.h"
#include "test_support.hpp"

namespace derev {
namespace {

using testing::noise_waveform;
using testing::relative_rms;

RealGrid random_magnitude(Index bins, Index frames, std::uint64_t seed) {
  return testing::random_grid(1, bins, frames, seed).channel(0).cwiseAbs();
}

TEST_CASE("shifted_magnitude_stack: slices of the magnitude grid") {
  const RealGrid mag = random_magnitude(7, 6, 1);
  const auto one = shifted_magnitude_stack<double>(mag, 1);
  CHECK(one.channel(0) == mag);
  const auto stack = shifted_magnitude_stack<double>(mag, 4);
  CHECK(stack.channels == 4);
  CHECK(stack.channel(2).col(1).cwiseAbs().maxCoeff() == 0.0);
  for (Index p = 0; p < 4; ++p) {
    for (Index l = p; l < 6; ++l) CHECK(stack.channel(p).col(l) == mag.col(l - p));
  }
  // More taps than frames leaves the surplus channels empty.
  CHECK(shifted_magnitude_stack<double>(mag, 9).channel(8).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(shifted_magnitude_stack<double>(mag, 0), ConfigError);
}

TEST_CASE("apply_inverse_filter: identity, negated identity, and shape checks") {
  const RealGrid mag = random_magnitude(9, 11, 2);
  const auto stack = shifted_magnitude_stack<double>(mag, 5);
  CHECK(apply_inverse_filter(stack, identity_filter(5, 9, 11)) == mag);
  InverseFilter negated = identity_filter(5, 9, 11);
  negated.values *= -1.0;
  CHECK(apply_inverse_filter(stack, negated).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(apply_inverse_filter(stack, identity_filter(4, 9, 11)), DataError);
}

TEST_CASE("apply_inverse_filter: truncated deconvolution of a two-tap kernel") {
  const Index taps = 9, bins = 5, frames = 40;
  const double g0 = 1.0, g1 = 0.6;
  const RealGrid clean = random_magnitude(bins, frames, 3);
  RealGrid reverberant = g0 * clean;
  reverberant.rightCols(frames - 1) += g1 * clean.leftCols(frames - 1);
  // Power series of 1 / (g0 + g1 z^-1).
  InverseFilter w(taps, bins, frames);
  for (Index p = 0; p < taps; ++p) w.values.row(p).setConstant(std::pow(-g1 / g0, p) / g0);
  const RealGrid estimate = apply_inverse_filter(shifted_magnitude_stack<double>(reverberant, taps), w);
  const double tail = std::pow(g1 / g0, taps) * clean.maxCoeff();
  CHECK((estimate - clean).cwiseAbs().maxCoeff() <= tail + 1e-12);
  CHECK((estimate - clean).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("apply_inverse_filter: linear before the clamp and causal") {
  const RealGrid mag = random_magnitude(6, 12, 4);
  InverseFilter w = identity_filter(3, 6, 12);
  w.values.row(1).setConstant(0.3);
  w.values.row(2).setConstant(0.1);
  const RealGrid base = apply_inverse_filter(shifted_magnitude_stack<double>(mag, 3), w);
  CHECK(apply_inverse_filter(shifted_magnitude_stack<double>(2.5 * mag, 3), w).isApprox(2.5 * base, 1e-14));
  RealGrid future = mag;
  future.rightCols(4).setConstant(100.0);
  const RealGrid changed = apply_inverse_filter(shifted_magnitude_stack<double>(future, 3), w);
  CHECK(changed.leftCols(8) == base.leftCols(8));
}

TEST_CASE("apply_inverse_filter_backward matches finite differences") {
  const auto stack = shifted_magnitude_stack<double>(random_magnitude(4, 5, 5), 3);
  auto w = testing::random_grid<double>(3, 4, 5, 6);
  const auto seed_grad = testing::random_grid<double>(1, 4, 5, 7).channel(0).eval();
  const auto loss = [&](const InverseFilter& f) {
    return apply_inverse_filter(stack, f).cwiseProduct(seed_grad).sum();
  };
  const InverseFilter grad = apply_inverse_filter_backward(stack, w, RealGrid(seed_grad));
  for (Index i = 0; i < w.values.size(); ++i) {
    const double saved = w.values.data()[i];
    w.values.data()[i] = saved + 1e-6;
    const double up = loss(w);
    w.values.data()[i] = saved - 1e-6;
    const double down = loss(w);
    w.values.data()[i] = saved;
    CHECK(testing::derivative_matches(grad.values.data()[i], (up - down) / 2e-6, 1e-5));
  }
}

TEST_CASE("extend_filter appends identity bins") {
  auto w = testing::random_grid<double>(3, 4, 6, 8);
  const InverseFilter full = extend_filter(w, 5);
  CHECK(full.bins == 5);
  for (Index p = 0; p < 3; ++p) CHECK(full.channel(p).topRows(4) == w.channel(p));
  CHECK((full.channel(0).row(4).array() == 1.0).all());
  CHECK(full.channel(1).row(4).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(extend_filter(w, 3), DataError);
}

TEST_CASE("reconstruct borrows the reverberant phase") {
  const Waveform y = noise_waveform(16000, 9);
  const SpectralFrameSet spec = stft(y);
  const RealGrid mag = magnitude(spec);
  const Waveform same = reconstruct(mag, spec);
  CHECK(relative_rms(same.samples.segment(400, 15200), y.samples.segment(400, 15200)) <= 1e-6);
  CHECK(reconstruct(RealGrid::Zero(257, spec.num_frames()), spec).samples.cwiseAbs().maxCoeff() == 0.0);
  CHECK(relative_rms(reconstruct(2.0 * mag, spec).samples, 2.0 * same.samples) <= 1e-12);
  CHECK_THROWS_AS(reconstruct(RealGrid::Zero(256, spec.num_frames()), spec), DataError);
}

TEST_CASE("identity filter through the full filter path reproduces the input") {
  const Waveform y = noise_waveform(16000, 10);
  const SpectralFrameSet spec = stft(y);
  const RealGrid mag = magnitude(spec);
  const InverseFilter w = extend_filter(identity_filter(9, 256, spec.num_frames()), 257);
  const RealGrid est = apply_inverse_filter(shifted_magnitude_stack<double>(mag, 9), w);
  CHECK(est == mag);
  const Waveform out = reconstruct(est, spec);
  CHECK(relative_rms(out.samples.segment(400, 15200), y.samples.segment(400, 15200)) <= 1e-6);
}

TEST_CASE("apply_mask scales coefficients") {
  const SpectralFrameSet spec = stft(noise_waveform(3000, 11));
  const Index k = spec.num_bins(), l = spec.num_frames();
  CHECK(apply_mask(spec, Mask{RealGrid::Ones(k, l)}).coeffs == spec.coeffs);
  CHECK(apply_mask(spec, Mask{RealGrid::Zero(k, l)}).coeffs.cwiseAbs().maxCoeff() == 0.0);
  const RealGrid half = RealGrid::Constant(k, l, 0.5);
  CHECK((apply_mask(spec, Mask{half}).coeffs - 0.5 * spec.coeffs).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(validate(Mask{RealGrid::Constant(2, 2, 1.5)}), DataError);
  CHECK_THROWS_AS(apply_mask(spec, Mask{RealGrid::Ones(k, l + 1)}), DataError);
}

TEST_CASE("dsm_head_decode inverts the log power spectrum") {
  CHECK(dsm_head_decode(RealGrid::Zero(2, 2))(1, 1) == 1.0);
  CHECK(dsm_head_decode(RealGrid::Constant(1, 1, 2.0))(0, 0) == doctest::Approx(std::exp(1.0)).epsilon(1e-15));
  const SpectralFrameSet spec = stft(noise_waveform(4000, 12));
  const RealGrid mag = magnitude(spec);
  const RealGrid decoded = dsm_head_decode(lps(spec).values);
  // Bins above the power floor survive the round trip.
  const Eigen::ArrayXXd above = (mag.array().square() > 1e-8).cast<double>();
  CHECK(((decoded - mag).array() * above).abs().maxCoeff() <= 1e-9 * mag.maxCoeff());
}

}  // namespace
}  // namespace derev
