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

#include "derev/room.hpp"

#include <unsupported/Eigen/FFT>
#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>

namespace derev {
namespace {

constexpr double kSabineConstant = 0.1611;  // s/m, 24 ln(10) / c

Index next_pow2(Index n) {
  Index p = 1;
  while (p < n) p <<= 1;
  return p;
}

// Adds amp * delta(n - delay) band-limited by a Hann-windowed sinc.
// Hann-windowed sinc centred on a fractional delay. Both the sinc numerator and
// the window cosine advance by fixed phase steps, so they are generated by
// rotation instead of per-tap trigonometry.
void add_fractional_impulse(RealVector& h, double delay, double amp) {
  constexpr Index half = (kFractionalDelayTaps - 1) / 2;
  constexpr double window_half_width = half + 1.0;
  const auto center = static_cast<Index>(std::floor(delay));
  const Index first = std::max<Index>(0, center - half);
  const Index last = std::min<Index>(h.size() - 1, center + half);
  if (first > last) return;
  const double x0 = static_cast<double>(first) - delay;
  // sin(pi x) flips sign each tap; sin(pi x0) fixes the magnitude.
  double sin_px = std::sin(std::numbers::pi * x0);
  const double step = std::numbers::pi / window_half_width;
  const std::complex<double> rotor = std::polar(1.0, step);
  std::complex<double> phase = std::polar(1.0, std::numbers::pi * x0 / window_half_width);
  for (Index n = first; n <= last; ++n) {
    const double x = static_cast<double>(n) - delay;
    const double w = 0.5 * (1.0 + phase.real());
    const double s = std::abs(x) < 1e-9 ? 1.0 : sin_px / (std::numbers::pi * x);
    h[n] += amp * w * s;
    sin_px = -sin_px;
    phase *= rotor;
  }
}

struct AxisImage {
  double offset;  // image coordinate minus microphone coordinate
  int reflections;
};

std::vector<AxisImage> axis_images(double length, double src, double mic, int order) {
  std::vector<AxisImage> out;
  out.reserve(static_cast<std::size_t>(4 * order + 2));
  for (int n = -order; n <= order; ++n) {
    for (int u = 0; u <= 1; ++u) {
      out.push_back({(1 - 2 * u) * src + 2.0 * n * length - mic, std::abs(n - u) + std::abs(n)});
    }
  }
  return out;
}

}  // namespace

void validate(const RoomSpec& room) {
  if ((room.dimensions.array() <= 0.0).any()) throw ConfigError("room dimensions must be positive");
  if (!(room.rt60 > 0.0)) throw ConfigError("rt60 must be positive");
  if (!(room.sample_rate > 0.0)) throw ConfigError("sample rate must be positive");
  const auto inside = [&](const Eigen::Vector3d& p) {
    return (p.array() > 0.0).all() && (p.array() < room.dimensions.array()).all();
  };
  if (!inside(room.source)) throw ConfigError("source position is not strictly inside the room");
  if (!inside(room.mic)) throw ConfigError("microphone position is not strictly inside the room");
  if (room.max_order && *room.max_order < 0) throw ConfigError("max_order must be non-negative");
}

void validate(const RirFilter& rir) {
  if (rir.taps.size() == 0) throw DataError("RIR has no taps");
  if (rir.early_len <= 0 || rir.early_len > rir.taps.size()) {
    throw DataError("RIR early length must satisfy 0 < Q_e <= Q");
  }
  if (!rir.taps.allFinite()) throw DataError("RIR contains non-finite taps");
  if (!(rir.sample_rate > 0.0)) throw DataError("RIR sample rate must be positive");
}

void validate(const SceneScript& scene) {
  if (scene.rirs.empty()) throw DataError("scene has no RIRs");
  if (!(scene.switch_period > 0.0)) throw DataError("scene switch period must be positive");
  for (const auto& rir : scene.rirs) {
    validate(rir);
    if (rir.sample_rate != scene.rirs.front().sample_rate || rir.early_len != scene.rirs.front().early_len) {
      throw DataError("scene RIRs must share sample rate and early length");
    }
  }
}

SabineAbsorption sabine_reflection(const RoomSpec& room) {
  const Eigen::Vector3d& d = room.dimensions;
  const double volume = d.prod();
  const double surface = 2.0 * (d.x() * d.y() + d.x() * d.z() + d.y() * d.z());
  const double alpha = kSabineConstant * volume / (surface * room.rt60);
  if (alpha > 1.0) {
    throw NumericError("rt60 " + std::to_string(room.rt60) + " s is too short for this room (Sabine absorption " +
                       std::to_string(alpha) + " > 1)");
  }
  return {alpha, std::sqrt(1.0 - alpha)};
}

RirFilter simulate_rir(const RoomSpec& room, Index early_len) {
  validate(room);
  const double fs = room.sample_rate;
  const double reflection = room.direct_path_only ? 0.0 : sabine_reflection(room).reflection;
  const auto length = static_cast<Index>(std::ceil(room.rt60 * fs));

  RirFilter rir;
  rir.sample_rate = fs;
  rir.early_len = std::min(early_len, length);
  rir.taps = RealVector::Zero(length);

  if (room.direct_path_only) {
    const double d = (room.source - room.mic).norm();
    add_fractional_impulse(rir.taps, d / kSpeedOfSound * fs, 1.0 / (4.0 * std::numbers::pi * d));
    return rir;
  }

  std::array<std::vector<AxisImage>, 3> axes;
  for (int a = 0; a < 3; ++a) {
    const int order = room.max_order.value_or(
        static_cast<int>(std::ceil(kSpeedOfSound * room.rt60 / room.dimensions[a])));
    axes[a] = axis_images(room.dimensions[a], room.source[a], room.mic[a], order);
  }

  // Images beyond this range cannot reach any tap.
  const double max_dist = (static_cast<double>(length) + kFractionalDelayTaps) / fs * kSpeedOfSound;
  const double max_dist2 = max_dist * max_dist;
  for (const auto& ix : axes[0]) {
    const double dx2 = ix.offset * ix.offset;
    if (dx2 > max_dist2) continue;
    for (const auto& iy : axes[1]) {
      const double dxy2 = dx2 + iy.offset * iy.offset;
      if (dxy2 > max_dist2) continue;
      for (const auto& iz : axes[2]) {
        const double d2 = dxy2 + iz.offset * iz.offset;
        if (d2 > max_dist2) continue;
        const double d = std::sqrt(d2);
        const int order = ix.reflections + iy.reflections + iz.reflections;
        const double amp = std::pow(reflection, order) / (4.0 * std::numbers::pi * d);
        add_fractional_impulse(rir.taps, d / kSpeedOfSound * fs, amp);
      }
    }
  }
  return rir;
}

RirFilter trim_propagation_delay(const RirFilter& rir, Index lead) {
  validate(rir);
  if (lead < 0) throw ConfigError("direct-path lead must be non-negative");
  Index peak = 0;
  rir.taps.cwiseAbs().maxCoeff(&peak);
  const Index start = std::max<Index>(0, peak - lead);
  RirFilter out = rir;
  out.taps = rir.taps.tail(rir.taps.size() - start);
  out.early_len = std::min(rir.early_len, out.taps.size());
  return out;
}

EarlyLate split_early_late(const RirFilter& rir) {
  validate(rir);
  return {rir.taps.head(rir.early_len), rir.taps.tail(rir.taps.size() - rir.early_len)};
}

RealVector convolve(const RealVector& x, const RealVector& h) {
  if (x.size() == 0 || h.size() == 0) return RealVector();
  const Index out_len = x.size() + h.size() - 1;
  const Index nfft = next_pow2(out_len);
  Eigen::FFT<double> fft;
  RealVector xp = RealVector::Zero(nfft), hp = RealVector::Zero(nfft);
  xp.head(x.size()) = x;
  hp.head(h.size()) = h;
  Eigen::VectorXcd xf, hf;
  fft.fwd(xf, xp);
  fft.fwd(hf, hp);
  Eigen::VectorXcd yf = xf.cwiseProduct(hf);
  RealVector y;
  fft.inv(y, yf);
  return y.head(out_len);
}

namespace {

// Adds conv(block, taps) delayed by `shift` samples into out[offset...],
// truncated to out's length.
void accumulate_convolution(RealVector& out, const RealVector& block, const RealVector& taps, Index offset,
                            Index shift) {
  if (taps.size() == 0 || block.size() == 0) return;
  const RealVector part = convolve(block, taps);
  const Index start = offset + shift;
  if (start >= out.size()) return;
  const Index count = std::min(part.size(), out.size() - start);
  out.segment(start, count) += part.head(count);
}

ReverbParts assemble(const Waveform& s, RealVector early, RealVector late) {
  ReverbParts parts;
  parts.early = {std::move(early), s.sample_rate};
  parts.late = {std::move(late), s.sample_rate};
  parts.y = {parts.early.samples + parts.late.samples, s.sample_rate};
  return parts;
}

}  // namespace

ReverbParts convolve_static(const Waveform& s, const RirFilter& rir) {
  validate(s);
  validate(rir);
  if (s.sample_rate != rir.sample_rate) throw DataError("signal and RIR sample rates differ");
  const EarlyLate split = split_early_late(rir);
  RealVector early = RealVector::Zero(s.size());
  RealVector late = RealVector::Zero(s.size());
  accumulate_convolution(early, s.samples, split.early, 0, 0);
  accumulate_convolution(late, s.samples, split.late, 0, rir.early_len);
  return assemble(s, std::move(early), std::move(late));
}

ReverbParts convolve_time_varying(const Waveform& s, const SceneScript& scene) {
  validate(s);
  validate(scene);
  if (s.sample_rate != scene.rirs.front().sample_rate) throw DataError("signal and scene sample rates differ");
  const auto block = std::max<Index>(1, static_cast<Index>(std::llround(scene.switch_period * s.sample_rate)));

  std::vector<EarlyLate> splits;
  for (const auto& rir : scene.rirs) splits.push_back(split_early_late(rir));
  const Index early_len = scene.rirs.front().early_len;

  RealVector early = RealVector::Zero(s.size());
  RealVector late = RealVector::Zero(s.size());
  for (Index start = 0, m = 0; start < s.size(); start += block, ++m) {
    const Index count = std::min(block, s.size() - start);
    const RealVector segment = s.samples.segment(start, count);
    const EarlyLate& split = splits[static_cast<std::size_t>(m) % splits.size()];
    accumulate_convolution(early, segment, split.early, start, 0);
    accumulate_convolution(late, segment, split.late, start, early_len);
  }
  return assemble(s, std::move(early), std::move(late));
}

RealVector energy_decay_curve(const RirFilter& rir) {
  const Index n = rir.taps.size();
  RealVector edc(n);
  double acc = 0.0;
  for (Index i = n - 1; i >= 0; --i) {
    acc += rir.taps[i] * rir.taps[i];
    edc[i] = acc;
  }
  if (acc <= 0.0) throw NumericError("RIR has zero energy");
  return (10.0 * (edc.array() / acc).max(1e-300).log10()).matrix();
}

double estimate_rt60(const RirFilter& rir, double fit_range_db) {
  const RealVector edc = energy_decay_curve(rir);
  const double upper = -5.0;
  const double lower = upper - fit_range_db;
  double st = 0, sy = 0, stt = 0, sty = 0;
  Index count = 0;
  for (Index i = 0; i < edc.size(); ++i) {
    if (edc[i] > upper || edc[i] < lower) continue;
    const double t = static_cast<double>(i) / rir.sample_rate;
    st += t;
    sy += edc[i];
    stt += t * t;
    sty += t * edc[i];
    ++count;
  }
  if (count < 2) throw NumericError("decay curve does not span the fit range");
  const double n = static_cast<double>(count);
  const double slope = (n * sty - st * sy) / (n * stt - st * st);  // dB per second
  if (!(slope < 0.0)) throw NumericError("energy decay curve is not decreasing");
  return -60.0 / slope;
}

void place_randomly(RoomSpec& room, std::uint64_t seed, double wall_margin, double min_distance) {
  if ((room.dimensions.array() <= 2.0 * wall_margin).any()) {
    throw ConfigError("room too small for the requested wall margin");
  }
  std::mt19937_64 rng(seed);
  const auto draw = [&]() {
    Eigen::Vector3d p;
    for (int a = 0; a < 3; ++a) {
      std::uniform_real_distribution<double> u(wall_margin, room.dimensions[a] - wall_margin);
      p[a] = u(rng);
    }
    return p;
  };
  for (int attempt = 0; attempt < 10000; ++attempt) {
    const Eigen::Vector3d src = draw();
    const Eigen::Vector3d mic = draw();
    if ((src - mic).norm() >= min_distance) {
      room.source = src;
      room.mic = mic;
      room.seed = seed;
      return;
    }
  }
  throw ConfigError("could not place source and microphone with the requested separation");
}

}  // namespace derev
