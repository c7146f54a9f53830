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

#include "derev/room.hpp"
#include "derev/types.hpp"

namespace derev {

// Convolutive transfer function H_kp, K bins by P frame taps, stored so that
// Y_kl = sum_p conj(H_kp) S_{k,l-p}.
struct CtfFilter {
  ComplexGrid coeffs;
  StftConfig config;

  Index num_bins() const { return coeffs.rows(); }
  Index num_taps() const { return coeffs.cols(); }
};

// Number of frame taps an RIR of `rir_len` samples can influence,
// ceil((Q + window_len) / hop).
Index ctf_num_taps(Index rir_len, const StftConfig& config);

// Band-wise CTF of a time-domain RIR. Tap p holds the fft_len-point DFT of
// the hop-long RIR segment [p*hop, (p+1)*hop), so an impulse at lag 0 maps
// to the identity filter and a delay of p0*hop samples maps to a unit tap at
// p0. Taps past the end of the RIR are zero.
CtfFilter ctf_from_rir(const RirFilter& rir, const StftConfig& config = {});

// Per-bin causal convolution along frames; frames before 0 are zero.
SpectralFrameSet ctf_convolve(const SpectralFrameSet& spectrum, const CtfFilter& ctf);

// |H_kp|.
RealGrid ctf_magnitude_kernel(const CtfFilter& ctf);

}  // namespace derev
