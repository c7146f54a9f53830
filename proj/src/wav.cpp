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

#include "derev/wav.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

namespace derev {
namespace {

static_assert(std::endian::native == std::endian::little, "WAV I/O assumes a little-endian host");

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

template <typename T>
T load(const std::vector<char>& bytes, std::size_t offset) {
  T value;
  std::memcpy(&value, bytes.data() + offset, sizeof(T));
  return value;
}

template <typename T>
void store(std::ofstream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

}  // namespace

Waveform read_wav(const std::filesystem::path& path, double expected_rate) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open WAV file: " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto fail = [&](const std::string& what) { return DataError(path.string() + ": " + what); };

  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw fail("not a RIFF/WAVE file");
  }

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  std::size_t data_offset = 0, data_size = 0;
  for (std::size_t pos = 12; pos + 8 <= bytes.size();) {
    const std::uint32_t chunk = load<std::uint32_t>(bytes, pos + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(bytes.data() + pos, "fmt ", 4) == 0) {
      if (chunk < 16 || body + chunk > bytes.size()) throw fail("truncated fmt chunk");
      format = load<std::uint16_t>(bytes, body);
      channels = load<std::uint16_t>(bytes, body + 2);
      rate = load<std::uint32_t>(bytes, body + 4);
      bits = load<std::uint16_t>(bytes, body + 14);
      if (format == kFormatExtensible && chunk >= 26) format = load<std::uint16_t>(bytes, body + 24);
    } else if (std::memcmp(bytes.data() + pos, "data", 4) == 0) {
      data_offset = body;
      data_size = std::min<std::size_t>(chunk, bytes.size() - body);
      break;
    }
    pos = body + chunk + (chunk & 1U);
  }

  if (channels == 0) throw fail("missing fmt chunk");
  if (data_offset == 0) throw fail("missing data chunk");
  if (channels != 1) throw fail("only mono audio is supported, found " + std::to_string(channels) + " channels");
  if (expected_rate > 0.0 && static_cast<double>(rate) != expected_rate) {
    throw fail("sample rate " + std::to_string(rate) + " Hz is not the required " +
               std::to_string(static_cast<int>(expected_rate)) + " Hz (resample the file first)");
  }

  Waveform x;
  x.sample_rate = rate;
  if (format == kFormatPcm && bits == 16) {
    const std::size_t n = data_size / 2;
    x.samples.resize(static_cast<Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      x.samples[static_cast<Index>(i)] = load<std::int16_t>(bytes, data_offset + 2 * i) / 32768.0;
    }
  } else if (format == kFormatFloat && bits == 32) {
    const std::size_t n = data_size / 4;
    x.samples.resize(static_cast<Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      x.samples[static_cast<Index>(i)] = load<float>(bytes, data_offset + 4 * i);
    }
  } else {
    throw fail("unsupported encoding (format " + std::to_string(format) + ", " + std::to_string(bits) +
               " bits); use 16-bit PCM or 32-bit float");
  }
  if (!x.samples.allFinite()) throw fail("non-finite samples");
  return x;
}

void write_wav(const std::filesystem::path& path, const Waveform& x, WavEncoding encoding) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write WAV file: " + path.string());

  const bool pcm = encoding == WavEncoding::kPcm16;
  const std::uint16_t bits = pcm ? 16 : 32;
  const std::uint16_t block = bits / 8;
  const auto rate = static_cast<std::uint32_t>(std::lround(x.sample_rate));
  const auto data_size = static_cast<std::uint32_t>(x.samples.size() * block);

  out.write("RIFF", 4);
  store<std::uint32_t>(out, 36 + data_size);
  out.write("WAVEfmt ", 8);
  store<std::uint32_t>(out, 16);
  store<std::uint16_t>(out, pcm ? kFormatPcm : kFormatFloat);
  store<std::uint16_t>(out, 1);
  store<std::uint32_t>(out, rate);
  store<std::uint32_t>(out, rate * block);
  store<std::uint16_t>(out, block);
  store<std::uint16_t>(out, bits);
  out.write("data", 4);
  store<std::uint32_t>(out, data_size);
  for (Index i = 0; i < x.samples.size(); ++i) {
    if (pcm) {
      const double clipped = std::clamp(x.samples[i], -1.0, 1.0);
      store<std::int16_t>(out, static_cast<std::int16_t>(std::lround(clipped * 32767.0)));
    } else {
      store<float>(out, static_cast<float>(x.samples[i]));
    }
  }
  if (!out) throw DataError("failed while writing WAV file: " + path.string());
}

}  // namespace derev
