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

#include "derev/nn/grid.hpp"
#include "derev/types.hpp"

namespace derev {

// Per-frame real inverse filter W_klp, taps laid out along the channel axis
// (P_d x K x L).
using InverseFilter = nn::Grid3<double>;

// Real-valued spectral gain, K x L, bounded in [0, 1].
struct Mask {
  RealGrid values;
};

void validate(const Mask& mask);

// Channel p holds |Y_{k, l-p}|, zero for l < p.
template <typename Scalar, typename Derived>
nn::Grid3<Scalar> shifted_magnitude_stack(const Eigen::MatrixBase<Derived>& mag, Index taps) {
  if (taps < 1) throw ConfigError("inverse filter needs at least one tap");
  const Index bins = mag.rows(), frames = mag.cols();
  nn::Grid3<Scalar> stack(taps, bins, frames);
  for (Index p = 0; p < taps && p < frames; ++p) {
    stack.channel(p).rightCols(frames - p) = mag.leftCols(frames - p).template cast<Scalar>();
  }
  return stack;
}

// max(0, sum_p W_klp |Y_{k,l-p}|): multiply the stack by the filter and sum
// along the channel axis, then clamp.
template <typename Scalar>
nn::Matrix<Scalar> apply_inverse_filter(const nn::Grid3<Scalar>& stack, const nn::Grid3<Scalar>& filter) {
  if (!stack.same_shape(filter)) throw DataError("inverse filter and magnitude stack shapes differ");
  const nn::Matrix<Scalar> sum = stack.values.cwiseProduct(filter.values).colwise().sum();
  return sum.cwiseMax(Scalar(0)).reshaped(stack.bins, stack.frames);
}

// Gradient of a loss with respect to the filter, given dL/d(output).
template <typename Scalar>
nn::Grid3<Scalar> apply_inverse_filter_backward(const nn::Grid3<Scalar>& stack, const nn::Grid3<Scalar>& filter,
                                                const nn::Matrix<Scalar>& grad_out) {
  const nn::Matrix<Scalar> pre = stack.values.cwiseProduct(filter.values).colwise().sum();
  const nn::Matrix<Scalar> gated = (pre.array() > Scalar(0)).select(grad_out.reshaped(1, pre.size()), Scalar(0));
  nn::Grid3<Scalar> grad(filter.channels, filter.bins, filter.frames);
  grad.values = stack.values.array().rowwise() * gated.row(0).array();
  return grad;
}

// Identity filter W = delta(p).
InverseFilter identity_filter(Index taps, Index bins, Index frames);

// Embeds a filter estimated on the first W.bins bins into a K-bin filter;
// the remaining bins receive the identity filter.
InverseFilter extend_filter(const InverseFilter& filter, Index bins);

// Y^E_kl = mag_kl exp(j angle(Y_kl)), then istft.
Waveform reconstruct(const RealGrid& mag, const SpectralFrameSet& reverberant);

// M_kl Y_kl.
SpectralFrameSet apply_mask(const SpectralFrameSet& spectrum, const Mask& mask);

// exp(lps / 2).
RealGrid dsm_head_decode(const RealGrid& lps_out);

}  // namespace derev
