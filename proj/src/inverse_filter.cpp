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

#include "derev/inverse_filter.hpp"

#include "derev/dsp.hpp"

namespace derev {

void validate(const Mask& mask) {
  if (!mask.values.allFinite() || (mask.values.array() < 0.0).any() || (mask.values.array() > 1.0).any()) {
    throw DataError("mask values must lie in [0, 1]");
  }
}

InverseFilter identity_filter(Index taps, Index bins, Index frames) {
  InverseFilter w(taps, bins, frames);
  w.values.row(0).setOnes();
  return w;
}

InverseFilter extend_filter(const InverseFilter& filter, Index bins) {
  if (filter.bins > bins) throw DataError("filter has more bins than the target spectrum");
  InverseFilter out = identity_filter(filter.channels, bins, filter.frames);
  for (Index p = 0; p < filter.channels; ++p) out.channel(p).topRows(filter.bins) = filter.channel(p);
  return out;
}

Waveform reconstruct(const RealGrid& mag, const SpectralFrameSet& reverberant) {
  if (mag.rows() != reverberant.num_bins() || mag.cols() != reverberant.num_frames()) {
    throw DataError("magnitude grid does not match the reverberant spectrum");
  }
  SpectralFrameSet est = reverberant;
  for (Index l = 0; l < mag.cols(); ++l) {
    for (Index k = 0; k < mag.rows(); ++k) {
      est.coeffs(k, l) = std::polar(mag(k, l), std::arg(reverberant.coeffs(k, l)));
    }
  }
  return istft(est);
}

SpectralFrameSet apply_mask(const SpectralFrameSet& spectrum, const Mask& mask) {
  if (mask.values.rows() != spectrum.num_bins() || mask.values.cols() != spectrum.num_frames()) {
    throw DataError("mask does not match the spectrum");
  }
  SpectralFrameSet out = spectrum;
  out.coeffs.array() *= mask.values.array().cast<Complex>();
  return out;
}

RealGrid dsm_head_decode(const RealGrid& lps_out) { return (0.5 * lps_out.array()).exp().matrix(); }

}  // namespace derev
