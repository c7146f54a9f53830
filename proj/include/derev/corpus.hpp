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

// Seeded source-filter speech surrogate for running the pipeline without a
// licensed corpus. Utterances are word-like runs of syllables: a glottal
// pulse train with jitter and declination drives a cascade of formant
// resonators, optionally preceded by a fricative or a plosive burst, with
// silent gaps between words.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "derev/types.hpp"

namespace derev {

struct SpeechSynthConfig {
  double duration = 3.0;  // s
  double sample_rate = kDefaultSampleRate;
  double rms = 0.05;  // output level before clipping protection
};

Waveform synthesize_utterance(std::uint64_t seed, const SpeechSynthConfig& config = {});

struct CorpusCounts {
  int train = 40;
  int validation = 8;
  int test = 8;
};

// Writes <dir>/{train,validation,test}/utt_NNNN.wav (PCM16) and returns the
// number of files written.
int write_synthetic_corpus(const std::filesystem::path& dir, const CorpusCounts& counts, std::uint64_t seed,
                           const SpeechSynthConfig& config = {});

// Sorted WAV files under <dir>/<split>; the first `count` are returned.
std::vector<std::filesystem::path> list_corpus(const std::filesystem::path& dir, const std::string& split,
                                               int count);

}  // namespace derev
