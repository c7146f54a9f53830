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

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "derev/types.hpp"

namespace derev {

constexpr double kSpeedOfSound = 343.0;  // m/s
constexpr Index kFractionalDelayTaps = 81;

struct RoomSpec {
  Eigen::Vector3d dimensions{8.0, 6.0, 4.0};  // m
  double rt60 = 0.5;                          // s
  Eigen::Vector3d source{2.0, 3.0, 1.5};
  Eigen::Vector3d mic{5.0, 3.0, 1.5};
  // Image order bound per axis; empty selects ceil(c * rt60 / dimension).
  std::optional<int> max_order;
  // Only the direct path is rendered (anechoic reference).
  bool direct_path_only = false;
  double sample_rate = kDefaultSampleRate;
  std::uint64_t seed = 0;
};

// Throws ConfigError on non-positive dimensions / rt60 or positions that
// are not strictly inside the room.
void validate(const RoomSpec& room);

struct RirFilter {
  RealVector taps;
  double sample_rate = kDefaultSampleRate;
  Index early_len = 32;  // Q_e

  Index size() const { return taps.size(); }
};

void validate(const RirFilter& rir);

struct SceneScript {
  std::vector<RirFilter> rirs;
  double switch_period = 1.0;  // s
};

void validate(const SceneScript& scene);

struct SabineAbsorption {
  double alpha;       // uniform absorption coefficient
  double reflection;  // sqrt(1 - alpha)
};

// alpha = 0.1611 V / (S rt60). Throws NumericError when alpha > 1.
SabineAbsorption sabine_reflection(const RoomSpec& room);

// Allen-Berkley image sources with 81-tap Hann-windowed sinc fractional
// delays. Length ceil(rt60 * fs). Deterministic for a fixed spec.
RirFilter simulate_rir(const RoomSpec& room, Index early_len = 32);

// Drops the propagation delay: taps before (direct-path peak - lead) are
// removed so the early window [0, Q_e) starts at the direct path. The peak
// is the largest |h|, which for a simulated room is the direct path.
RirFilter trim_propagation_delay(const RirFilter& rir, Index lead = 2);

struct EarlyLate {
  RealVector early;  // taps [0, Q_e)
  RealVector late;   // taps [Q_e, Q)
};

EarlyLate split_early_late(const RirFilter& rir);

// Reverberant signal and its early / late components, each truncated to the
// input length. y is formed as y_early + y_late.
struct ReverbParts {
  Waveform y;
  Waveform early;
  Waveform late;
};

// Full linear convolution (length N + Q - 1), computed by FFT.
RealVector convolve(const RealVector& x, const RealVector& h);

ReverbParts convolve_static(const Waveform& s, const RirFilter& rir);

// Input block m (of switch_period seconds) is convolved with
// rirs[m mod R]; block outputs are overlap-added.
ReverbParts convolve_time_varying(const Waveform& s, const SceneScript& scene);

// Schroeder backward-integrated energy decay in dB (0 dB at t = 0).
RealVector energy_decay_curve(const RirFilter& rir);

// RT60 extrapolated from a linear fit of the decay curve between
// -5 dB and (-5 - fit_range_db) dB.
double estimate_rt60(const RirFilter& rir, double fit_range_db = 20.0);

// Uniform random source and microphone positions at least wall_margin from
// every wall and min_distance apart. Deterministic in seed.
void place_randomly(RoomSpec& room, std::uint64_t seed, double wall_margin = 0.5,
                    double min_distance = 1.0);

}  // namespace derev
