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

#include "derev/ctf.hpp"

#include <unsupported/Eigen/FFT>

#include "derev/dsp.hpp"

namespace derev {

Index ctf_num_taps(Index rir_len, const StftConfig& config) {
  return (rir_len + config.window_len + config.hop - 1) / config.hop;
}

CtfFilter ctf_from_rir(const RirFilter& rir, const StftConfig& config) {
  validate(config);
  validate(rir);
  const Index taps = ctf_num_taps(rir.size(), config);
  CtfFilter ctf;
  ctf.config = config;
  ctf.coeffs = ComplexGrid::Zero(config.num_bins(), taps);

  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  RealVector block(config.fft_len);
  Eigen::VectorXcd spectrum;
  for (Index p = 0; p * config.hop < rir.size(); ++p) {
    const Index start = p * config.hop;
    const Index count = std::min(config.hop, rir.size() - start);
    block.setZero();
    block.head(count) = rir.taps.segment(start, count);
    fft.fwd(spectrum, block);
    ctf.coeffs.col(p) = spectrum.head(config.num_bins()).conjugate();
  }
  return ctf;
}

SpectralFrameSet ctf_convolve(const SpectralFrameSet& spectrum, const CtfFilter& ctf) {
  if (spectrum.num_bins() != ctf.num_bins()) {
    throw DataError("CTF bin count " + std::to_string(ctf.num_bins()) + " does not match spectrum bin count " +
                    std::to_string(spectrum.num_bins()));
  }
  SpectralFrameSet out = spectrum;
  out.coeffs.setZero();
  const Index frames = spectrum.num_frames();
  for (Index p = 0; p < ctf.num_taps(); ++p) {
    if (p >= frames) break;
    const Eigen::VectorXcd h = ctf.coeffs.col(p).conjugate();
    out.coeffs.rightCols(frames - p).array() +=
        spectrum.coeffs.leftCols(frames - p).array().colwise() * h.array();
  }
  return out;
}

RealGrid ctf_magnitude_kernel(const CtfFilter& ctf) { return ctf.coeffs.cwiseAbs(); }

}  // namespace derev
