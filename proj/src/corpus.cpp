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

#include "derev/corpus.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "derev/wav.hpp"

namespace derev {
namespace {

struct Vowel {
  std::array<double, 4> formant;    // Hz
  std::array<double, 4> bandwidth;  // Hz
};

// Rough adult formant targets for a handful of vowels.
constexpr std::array<Vowel, 7> kVowels{{
    {{730, 1090, 2440, 3400}, {80, 90, 120, 200}},   // a
    {{270, 2290, 3010, 3500}, {60, 100, 120, 200}},  // i
    {{300, 870, 2240, 3300}, {60, 90, 120, 200}},    // u
    {{530, 1840, 2480, 3400}, {70, 100, 120, 200}},  // e
    {{570, 840, 2410, 3300}, {70, 90, 120, 200}},    // o
    {{660, 1720, 2410, 3400}, {80, 100, 120, 200}},  // ae
    {{490, 1350, 1690, 3300}, {70, 100, 120, 200}},  // er
}};

// Two-pole resonator with unit gain at DC.
class Resonator {
 public:
  void tune(double freq, double bandwidth, double fs) {
    const double r = std::exp(-std::numbers::pi * bandwidth / fs);
    a1_ = 2.0 * r * std::cos(2.0 * std::numbers::pi * freq / fs);
    a2_ = -r * r;
    gain_ = 1.0 - a1_ - a2_;
  }
  double step(double x) {
    const double y = gain_ * x + a1_ * y1_ + a2_ * y2_;
    y2_ = y1_;
    y1_ = y;
    return y;
  }

 private:
  double a1_ = 0, a2_ = 0, gain_ = 1, y1_ = 0, y2_ = 0;
};

class OnePole {
 public:
  explicit OnePole(double coeff) : coeff_(coeff) {}
  double step(double x) {
    y_ = (1.0 - coeff_) * x + coeff_ * y_;
    return y_;
  }

 private:
  double coeff_, y_ = 0.0;
};

// Rosenberg-style glottal flow derivative over one period, phase in [0, 1).
double glottal_pulse(double phase) {
  constexpr double open = 0.4, close = 0.16;
  if (phase < open) return std::sin(std::numbers::pi * phase / open) * 0.5 * std::numbers::pi / open;
  if (phase < open + close) return -std::sin(0.5 * std::numbers::pi * (phase - open) / close) / close;
  return 0.0;
}

}  // namespace

Waveform synthesize_utterance(std::uint64_t seed, const SpeechSynthConfig& config) {
  if (!(config.duration > 0.0) || !(config.sample_rate > 0.0)) throw ConfigError("invalid speech synth settings");
  const double fs = config.sample_rate;
  const auto total = static_cast<Index>(std::llround(config.duration * fs));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  // Speaker traits.
  const double base_f0 = uniform(90.0, 230.0);
  const double formant_scale = base_f0 > 160.0 ? uniform(1.08, 1.2) : uniform(0.95, 1.05);

  RealVector out = RealVector::Zero(total);
  std::array<Resonator, 4> tract;
  OnePole lip(0.0);
  double phase = 0.0;
  std::size_t vowel = rng() % kVowels.size();
  Index n = static_cast<Index>(uniform(0.05, 0.2) * fs);

  while (n < total) {
    const int syllables = 1 + static_cast<int>(rng() % 3);
    for (int s = 0; s < syllables && n < total; ++s) {
      // Consonant onset.
      const double onset = unit(rng);
      if (onset < 0.35) {
        const auto len = static_cast<Index>(uniform(0.04, 0.12) * fs);
        const double brightness = uniform(0.3, 0.8);
        Resonator hiss;
        hiss.tune(uniform(2500.0, 6000.0), uniform(800.0, 2000.0), fs);
        double prev = 0.0;
        for (Index i = 0; i < len && n < total; ++i, ++n) {
          const double white = gauss(rng);
          const double hp = white - brightness * prev;  // tilt toward high frequencies
          prev = white;
          const double env = std::sin(std::numbers::pi * static_cast<double>(i) / static_cast<double>(len));
          out[n] += 0.25 * env * hiss.step(hp);
        }
      } else if (onset < 0.55) {
        const auto gap = static_cast<Index>(uniform(0.02, 0.05) * fs);
        n += gap;
        const auto burst = static_cast<Index>(0.008 * fs);
        for (Index i = 0; i < burst && n < total; ++i, ++n) {
          out[n] += 0.6 * std::exp(-static_cast<double>(i) / (0.002 * fs)) * gauss(rng);
        }
      }

      // Voiced nucleus with a formant glide from the previous vowel.
      const std::size_t next = rng() % kVowels.size();
      const Vowel& from = kVowels[vowel];
      const Vowel& to = kVowels[next];
      vowel = next;
      const auto len = static_cast<Index>(uniform(0.10, 0.28) * fs);
      const double f0_start = base_f0 * uniform(0.9, 1.2);
      const double f0_end = base_f0 * uniform(0.75, 1.0);
      const double breath = uniform(0.02, 0.08);
      for (Index i = 0; i < len && n < total; ++i, ++n) {
        const double t = static_cast<double>(i) / static_cast<double>(len);
        if (i % 32 == 0) {
          const double glide = std::min(1.0, t / 0.3);
          for (std::size_t f = 0; f < 4; ++f) {
            const double freq = formant_scale * (from.formant[f] + glide * (to.formant[f] - from.formant[f]));
            tract[f].tune(std::min(freq, 0.45 * fs), to.bandwidth[f], fs);
          }
        }
        const double f0 = (f0_start + t * (f0_end - f0_start)) * (1.0 + 0.01 * gauss(rng));
        phase += f0 / fs;
        phase -= std::floor(phase);
        const double env = std::min({1.0, t / 0.15, (1.0 - t) / 0.25});
        double x = env * (glottal_pulse(phase) + breath * gauss(rng));
        for (auto& r : tract) x = r.step(x);
        out[n] += lip.step(x);
      }
    }
    // Word gap.
    n += static_cast<Index>(uniform(0.04, 0.25) * fs);
  }

  const double rms = std::sqrt(out.squaredNorm() / static_cast<double>(std::max<Index>(total, 1)));
  if (rms > 0.0) out *= config.rms / rms;
  const double peak = out.cwiseAbs().maxCoeff();
  if (peak > 0.95) out *= 0.95 / peak;
  return {std::move(out), fs};
}

int write_synthetic_corpus(const std::filesystem::path& dir, const CorpusCounts& counts, std::uint64_t seed,
                           const SpeechSynthConfig& config) {
  int written = 0;
  const std::array<std::pair<const char*, int>, 3> splits{{
      {"train", counts.train}, {"validation", counts.validation}, {"test", counts.test}}};
  std::uint64_t split_offset = 0;
  for (const auto& [name, count] : splits) {
    for (int i = 0; i < count; ++i) {
      char file[32];
      std::snprintf(file, sizeof(file), "utt_%04d.wav", i);
      const std::uint64_t utt_seed = seed * 1000003ULL + split_offset + static_cast<std::uint64_t>(i);
      write_wav(dir / name / file, synthesize_utterance(utt_seed, config), WavEncoding::kPcm16);
      ++written;
    }
    split_offset += 100000;
  }
  return written;
}

std::vector<std::filesystem::path> list_corpus(const std::filesystem::path& dir, const std::string& split,
                                               int count) {
  const auto sub = dir / split;
  if (!std::filesystem::is_directory(sub)) {
    throw DataError("corpus directory " + sub.string() + " does not exist (expected <corpus>/" + split +
                    "/*.wav; run `derev synth-corpus` to generate a synthetic corpus)");
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(sub)) {
    if (entry.is_regular_file() && entry.path().extension() == ".wav") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (static_cast<int>(files.size()) < count) {
    throw DataError("corpus directory " + sub.string() + " holds " + std::to_string(files.size()) +
                    " WAV files, " + std::to_string(count) + " requested");
  }
  files.resize(static_cast<std::size_t>(count));
  return files;
}

}  // namespace derev
