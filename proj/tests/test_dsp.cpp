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

#include <filesystem>
#include <numbers>

#include "derev/dsp.hpp"
#include "derev/wav.hpp"
#include "doctest.h"
#include "test_support.hpp"

namespace derev {
namespace {

using testing::noise_waveform;
using testing::relative_rms;

// Interior of a signal: the first and last window_len samples are dropped.
RealVector interior(const RealVector& x, Index window_len) { return x.segment(window_len, x.size() - 2 * window_len); }

TEST_CASE("make_window: periodic Hamming endpoints and range") {
  const StftConfig config;
  const RealVector w = make_window(config);
  REQUIRE(w.size() == 400);
  CHECK(w[0] == doctest::Approx(0.08).epsilon(1e-15));
  CHECK(w[200] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(w.minCoeff() > 0.0);
  CHECK(w.maxCoeff() <= 1.0);
  // Periodic: symmetric about n = N/2, so w[1] == w[399].
  CHECK(w[1] == doctest::Approx(w[399]).epsilon(1e-14));
  CHECK_THROWS_AS(make_window({1, 1, 2}), ConfigError);
}

TEST_CASE("overlap_window_power: direct summation is positive at hop 160") {
  const StftConfig config;
  const RealVector w = make_window(config);
  // Direct oracle: a long run of frames; check the steady-state middle.
  const Index frames = 20, span = (frames - 1) * config.hop + config.window_len;
  RealVector sum = RealVector::Zero(span);
  for (Index l = 0; l < frames; ++l) sum.segment(l * config.hop, config.window_len) += w.cwiseAbs2();
  const RealVector steady = sum.segment(config.window_len, 5 * config.hop);
  CHECK(steady.minCoeff() > 0.0);
  const RealVector fast = overlap_window_power(config);
  for (Index n = 0; n < steady.size(); ++n) {
    CHECK(fast[(config.window_len + n) % config.hop] == doctest::Approx(steady[n]).epsilon(1e-12));
  }
}

TEST_CASE("validate(StftConfig) rejects impossible layouts") {
  CHECK_NOTHROW(validate(StftConfig{}));
  CHECK_THROWS_AS(validate(StftConfig{400, 0, 512}), ConfigError);
  CHECK_THROWS_AS(validate(StftConfig{400, 401, 512}), ConfigError);
  CHECK_THROWS_AS(validate(StftConfig{600, 160, 512}), ConfigError);
}

TEST_CASE("stft: frame layout and bin count") {
  const Waveform x = noise_waveform(16000, 1);
  const SpectralFrameSet y = stft(x);
  CHECK(y.num_bins() == 257);
  CHECK(y.num_frames() == 100);
  CHECK(stft(noise_waveform(16001, 1)).num_frames() == 101);
  CHECK_THROWS_AS(stft(Waveform{}), DataError);
}

TEST_CASE("stft: bin-aligned cosine concentrates in its bin (direct DFT oracle)") {
  const StftConfig config;
  const Index k0 = 40;
  Waveform x;
  x.samples.resize(8000);
  for (Index n = 0; n < x.size(); ++n) {
    x.samples[n] = std::cos(2.0 * std::numbers::pi * static_cast<double>(k0 * n) / 512.0);
  }
  const SpectralFrameSet y = stft(x, config);
  const RealVector w = make_window(config);
  for (Index l : {3, 10, 30}) {
    Index peak;
    y.coeffs.col(l).cwiseAbs().maxCoeff(&peak);
    CHECK(peak == k0);
    // Direct DFT of the windowed frame for a few bins.
    for (Index k : {Index{0}, k0 - 1, k0, k0 + 7, Index{256}}) {
      Complex acc = 0.0;
      for (Index n = 0; n < config.window_len; ++n) {
        acc += x.samples[l * config.hop + n] * w[n] *
               std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k * n) / 512.0);
      }
      CHECK(std::abs(y.coeffs(k, l) - acc) < 1e-9);
    }
  }
}

TEST_CASE("stft: zero input gives zero coefficients") {
  Waveform x{RealVector::Zero(3000), kDefaultSampleRate};
  CHECK(stft(x).coeffs.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("stft: delay by a whole number of hops shifts frames") {
  const StftConfig config;
  const Waveform x = noise_waveform(8000, 2);
  const Index p0 = 3;
  Waveform delayed{RealVector::Zero(x.size() + p0 * config.hop), x.sample_rate};
  delayed.samples.tail(x.size()) = x.samples;
  const SpectralFrameSet a = stft(x, config), b = stft(delayed, config);
  for (Index l = p0; l < a.num_frames() - 3; ++l) {
    CHECK((b.coeffs.col(l + p0) - a.coeffs.col(l)).cwiseAbs().maxCoeff() <= 1e-9 * a.coeffs.col(l).norm());
  }
  // Only frames ending before the delay are empty.
  CHECK(b.coeffs.leftCols(1).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("stft is linear") {
  const Waveform x = noise_waveform(5000, 3), y = noise_waveform(5000, 4);
  const double a = 0.7, b = -1.9;
  const Waveform mix{a * x.samples + b * y.samples, x.sample_rate};
  const ComplexGrid expected = a * stft(x).coeffs + b * stft(y).coeffs;
  CHECK((stft(mix).coeffs - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("stft: per-frame Parseval with one-sided bins counted twice") {
  const StftConfig config;
  const Waveform x = noise_waveform(4000, 5);
  const SpectralFrameSet y = stft(x, config);
  const RealVector w = make_window(config);
  for (Index l = 0; l < 20; ++l) {
    const Index count = std::min(config.window_len, x.size() - l * config.hop);
    const double time_energy = x.samples.segment(l * config.hop, count).cwiseProduct(w.head(count)).squaredNorm();
    const auto mag2 = y.coeffs.col(l).cwiseAbs2();
    const double freq_energy = (mag2[0] + mag2[256] + 2.0 * mag2.segment(1, 255).sum()) / 512.0;
    CHECK(std::abs(freq_energy - time_energy) <= 1e-9 * time_energy);
  }
}

TEST_CASE("istft inverts stft on the interior") {
  for (std::uint64_t seed = 10; seed < 15; ++seed) {
    const Waveform x = noise_waveform(16000, seed);
    const Waveform r = istft(stft(x));
    REQUIRE(r.size() == x.size());
    CHECK(relative_rms(interior(r.samples, 400), interior(x.samples, 400)) <= 1e-6);
    // Normalized overlap-add is exact at the edges too.
    CHECK(relative_rms(r.samples, x.samples) <= 1e-12);
  }
}

TEST_CASE("istft: zero frames give silence; doubled spectrum doubles the signal") {
  const Waveform x = noise_waveform(6000, 20);
  SpectralFrameSet y = stft(x);
  SpectralFrameSet zero = y;
  zero.coeffs.setZero();
  CHECK(istft(zero).samples.cwiseAbs().maxCoeff() == 0.0);
  y.coeffs *= 2.0;
  CHECK(relative_rms(interior(istft(y).samples, 400), interior(2.0 * x.samples, 400)) < 1e-12);
}

TEST_CASE("lps applies the power floor") {
  SpectralFrameSet y;
  y.coeffs.resize(3, 1);
  y.coeffs << Complex(1.0, 0.0), Complex(0.0, 0.0), Complex(0.0, std::numbers::e);
  const FeatureMatrix v = lps(y);
  CHECK(v.values(0, 0) == doctest::Approx(0.0));
  CHECK(v.values(1, 0) == doctest::Approx(std::log(1e-10)).epsilon(1e-14));
  CHECK(v.values(2, 0) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(v.values.allFinite());
}

TEST_CASE("stack_multiframe pads with zero vectors") {
  FeatureMatrix v{testing::random_grid(1, 6, 8, 30).channel(0)};
  CHECK(stack_multiframe(v, 4, 1) == v.values.col(4));
  const RealGrid first = stack_multiframe(v, 0, 5);
  CHECK(first.leftCols(2).cwiseAbs().maxCoeff() == 0.0);
  CHECK(first.rightCols(3) == v.values.leftCols(3));
  CHECK(stack_multiframe(v, 4, 5) == v.values.middleCols(2, 5));
  const RealGrid last = stack_multiframe(v, 7, 5);
  CHECK(last.rightCols(2).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(stack_multiframe(v, 3, 4), ConfigError);
}

TEST_CASE("WAV round trip in float and PCM16; other rates are rejected") {
  const auto dir = std::filesystem::temp_directory_path() / "derev_wav_test";
  std::filesystem::create_directories(dir);
  const Waveform x = noise_waveform(1234, 40, 0.2);
  write_wav(dir / "f.wav", x, WavEncoding::kFloat32);
  const Waveform f = read_wav(dir / "f.wav");
  CHECK((f.samples - x.samples).cwiseAbs().maxCoeff() < 1e-7);
  write_wav(dir / "p.wav", x, WavEncoding::kPcm16);
  const Waveform p = read_wav(dir / "p.wav");
  CHECK((p.samples - x.samples).cwiseAbs().maxCoeff() < 1.0 / 32767.0);

  Waveform slow = x;
  slow.sample_rate = 8000.0;
  write_wav(dir / "s.wav", slow);
  CHECK_THROWS_AS(read_wav(dir / "s.wav"), DataError);
  CHECK(read_wav(dir / "s.wav", 0.0).sample_rate == 8000.0);
  CHECK_THROWS_AS(read_wav(dir / "missing.wav"), DataError);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace derev
