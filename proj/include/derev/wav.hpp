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

#include <filesystem>

#include "derev/types.hpp"

namespace derev {

enum class WavEncoding { kPcm16, kFloat32 };

// Reads a mono PCM16 or IEEE float32 RIFF/WAVE file. When expected_rate is
// positive, any other sample rate is rejected with a DataError (no
// resampling is performed).
Waveform read_wav(const std::filesystem::path& path, double expected_rate = kDefaultSampleRate);

// Writes a mono WAV file. PCM16 output is clipped to [-1, 1].
void write_wav(const std::filesystem::path& path, const Waveform& x,
               WavEncoding encoding = WavEncoding::kFloat32);

}  // namespace derev
