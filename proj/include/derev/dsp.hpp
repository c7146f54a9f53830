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

#include "derev/types.hpp"

namespace derev {

// Floor applied to |Y|^2 before the logarithm.
constexpr double kPowerFloor = 1e-10;

// Periodic Hamming window, w[n] = 0.54 - 0.46 cos(2 pi n / window_len).
RealVector make_window(const StftConfig& config);

// Sum over frames of the squared analysis window seen by each sample of one
// hop period in steady state. Strictly positive for every valid config.
RealVector overlap_window_power(const StftConfig& config);

// Frame l covers samples [l*hop, l*hop + window_len); the signal is zero
// padded at the end so that L = ceil(N / hop) frames cover every sample.
SpectralFrameSet stft(const Waveform& x, const StftConfig& config = {});

// Weighted overlap-add with synthesis window w[n] / sum_m w^2[n - m*hop].
// Exact inverse of stft() wherever the frames are unmodified.
Waveform istft(const SpectralFrameSet& spectrum);

// |Y_kl|.
RealGrid magnitude(const SpectralFrameSet& spectrum);

// v_kl = ln(max(|Y_kl|^2, kPowerFloor)).
FeatureMatrix lps(const SpectralFrameSet& spectrum);

// Columns v_{l-(L_m-1)/2} ... v_{l+(L_m-1)/2}; frames outside [0, L) are
// zero vectors. Requires an odd context length.
RealGrid stack_multiframe(const FeatureMatrix& features, Index frame, Index context);

}  // namespace derev
