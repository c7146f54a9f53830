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

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "derev/corpus.hpp"
#include "derev/error.hpp"
#include "derev/metrics.hpp"
#include "doctest.h"
#include "test_support.hpp"

namespace derev {
namespace {

using testing::noise_waveform;
using testing::white_noise;

Waveform speech(std::uint64_t seed) { return synthesize_utterance(seed); }

// Adds white noise scaled to the requested SNR against x.
Waveform with_noise(const Waveform& x, double snr_db, std::uint64_t seed) {
  RealVector n = white_noise(x.samples.size(), seed);
  n *= x.samples.norm() / n.norm() * std::pow(10.0, -snr_db / 20.0);
  return {x.samples + n, x.sample_rate};
}

MetricRecord record(std::string scenario, std::string method, double sdr, double stoi) {
  return {"u", "room1", 0.5, std::move(scenario), std::move(method), sdr, stoi};
}

TEST_CASE("si_sdr of an exact copy hits the cap") {
  const Waveform x = noise_waveform(8000, 1);
  CHECK(si_sdr(x, x) == doctest::Approx(kSiSdrLimit));
}

TEST_CASE("si_sdr ignores positive scaling of the estimate") {
  const Waveform x = noise_waveform(8000, 2);
  const Waveform doubled{2.0 * x.samples, x.sample_rate};
  CHECK(si_sdr(doubled, x) == doctest::Approx(kSiSdrLimit));
  const Waveform noisy = with_noise(x, 10.0, 3);
  const Waveform scaled{0.37 * noisy.samples, x.sample_rate};
  CHECK(si_sdr(scaled, x) == doctest::Approx(si_sdr(noisy, x)).epsilon(1e-12));
}

TEST_CASE("si_sdr with orthogonal noise of equal energy is 0 dB") {
  const Index n = 4000;
  RealVector ref(n), noise(n);
  for (Index i = 0; i < n; ++i) {
    ref[i] = std::sin(2.0 * std::numbers::pi * 10.0 * static_cast<double>(i) / static_cast<double>(n));
    noise[i] = std::cos(2.0 * std::numbers::pi * 10.0 * static_cast<double>(i) / static_cast<double>(n));
  }
  REQUIRE(std::abs(ref.dot(noise)) < 1e-9);
  // alpha = 1, so the ratio is |ref|^2 / |noise|^2.
  const double expected = 10.0 * std::log10(ref.squaredNorm() / noise.squaredNorm());
  const double value = si_sdr({ref + noise, kDefaultSampleRate}, {ref, kDefaultSampleRate});
  CHECK(value == doctest::Approx(expected).epsilon(1e-12));
  CHECK(std::abs(value) < 1e-9);
}

TEST_CASE("si_sdr truncates to the shorter signal and rejects a silent reference") {
  const Waveform x = noise_waveform(8000, 4);
  const Waveform longer{[&] {
                          RealVector v = RealVector::Zero(9000);
                          v.head(8000) = x.samples;
                          v.tail(1000) = white_noise(1000, 5);
                          return v;
                        }(),
                        x.sample_rate};
  CHECK(si_sdr(longer, x) == doctest::Approx(kSiSdrLimit));
  const Waveform silent{RealVector::Zero(8000), x.sample_rate};
  CHECK_THROWS_AS(si_sdr(x, silent), DataError);
  CHECK(si_sdr(silent, x) == doctest::Approx(-kSiSdrLimit));
}

TEST_CASE("resample preserves a low-frequency tone") {
  const Index n = 16000;
  RealVector x(n);
  for (Index i = 0; i < n; ++i) x[i] = std::sin(2.0 * std::numbers::pi * 440.0 * static_cast<double>(i) / 16000.0);
  const RealVector y = resample(x, 5, 8);
  CHECK(y.size() == 10000);
  double worst = 0.0;
  for (Index j = 200; j < y.size() - 200; ++j) {
    const double expected = std::sin(2.0 * std::numbers::pi * 440.0 * static_cast<double>(j) / 10000.0);
    worst = std::max(worst, std::abs(y[j] - expected));
  }
  CHECK(worst < 2e-3);
}

TEST_CASE("resample suppresses content above the new Nyquist rate") {
  const Index n = 16000;
  RealVector x(n);
  for (Index i = 0; i < n; ++i) x[i] = std::sin(2.0 * std::numbers::pi * 7000.0 * static_cast<double>(i) / 16000.0);
  const RealVector y = resample(x, 5, 8);
  const double rms = std::sqrt(y.segment(200, y.size() - 400).squaredNorm() / static_cast<double>(y.size() - 400));
  CHECK(rms < 1e-2);
}

TEST_CASE("estoi of an exact copy is 1") {
  const Waveform x = speech(11);
  CHECK(estoi(x, x) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("estoi of independent noise is near zero") {
  const Waveform ref = speech(12);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Waveform est = noise_waveform(ref.samples.size(), 100 + seed, 0.05);
    const double score = estoi(est, ref);
    CAPTURE(seed);
    CHECK(std::abs(score) < 0.1);
  }
}

TEST_CASE("estoi rises with SNR") {
  const Waveform ref = speech(13);
  const double high = estoi(with_noise(ref, 3.0, 21), ref);
  const double low = estoi(with_noise(ref, -3.0, 21), ref);
  CHECK(high > low);
  CHECK(high <= 1.0);
  CHECK(low >= -1.0);
}

TEST_CASE("estoi ignores global scaling of either signal") {
  const Waveform ref = speech(14);
  const Waveform est = with_noise(ref, 0.0, 22);
  const double base = estoi(est, ref);
  CHECK(estoi({3.0 * est.samples, est.sample_rate}, ref) == doctest::Approx(base).epsilon(1e-9));
  CHECK(estoi(est, {0.2 * ref.samples, ref.sample_rate}) == doctest::Approx(base).epsilon(1e-9));
}

TEST_CASE("estoi is deterministic and rejects short input") {
  const Waveform ref = speech(15);
  const Waveform est = with_noise(ref, 5.0, 23);
  CHECK(estoi(est, ref) == estoi(est, ref));
  const Waveform tiny = noise_waveform(4000, 6);
  CHECK_THROWS_AS(estoi(tiny, tiny), DataError);
}

TEST_CASE("aggregate of a single entry returns it") {
  const auto rows = aggregate({record("static", "ifilt", 7.5, 0.6)});
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].si_sdr == 7.5);
  CHECK(rows[0].estoi == 0.6);
  CHECK(rows[0].count == 1);
  CHECK(rows[0].method == "ifilt");
}

TEST_CASE("aggregate averages a cell") {
  const auto rows = aggregate({record("static", "rev", 1.0, 1.0), record("static", "rev", 3.0, 3.0)});
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].si_sdr == 2.0);
  CHECK(rows[0].estoi == 2.0);
  CHECK(rows[0].count == 2);
}

TEST_CASE("aggregate keeps scenarios apart and orders methods") {
  const auto rows = aggregate({record("static", "ifilt", 1.0, 0.1), record("time-varying", "rev", 5.0, 0.5),
                               record("static", "rev", 3.0, 0.3), record("time-varying", "rev", 7.0, 0.7)});
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].scenario == "static");
  CHECK(rows[0].method == "rev");
  CHECK(rows[1].method == "ifilt");
  CHECK(rows[2].scenario == "time-varying");
  CHECK(rows[2].si_sdr == 6.0);
  CHECK_THROWS_AS(aggregate({}), DataError);
}

TEST_CASE("report writers emit every cell") {
  std::vector<MetricRecord> records;
  for (const char* method : {"rev", "dsm", "dirm", "ifilt"}) {
    for (double rt : {0.5, 1.0}) records.push_back({"u", "room1", rt, "static", method, 1.0, 0.5});
  }
  const auto rows = aggregate(records);
  std::ostringstream csv;
  write_metrics_csv(csv, rows);
  // Header plus rooms x RT60s x metrics x methods.
  const std::string text = csv.str();
  const auto lines = std::count(text.begin(), text.end(), '\n');
  CHECK(lines == 1 + 1 * 2 * 3 * 4);
  std::ostringstream table;
  write_metrics_table(table, rows);
  for (const char* label : {"Rev.", "DSM", "dIRM", "iFilt", "SRMR", "ESTOI"}) {
    CHECK(table.str().find(label) != std::string::npos);
  }
  CHECK(table.str().find("time-varying") == std::string::npos);
}

TEST_CASE("metric records round-trip through JSON lines") {
  const std::vector<MetricRecord> records{{"utt_0001", "room2", 1.0, "time-varying", "dirm", -3.25, 0.125},
                                          {"utt_0002", "room1", 0.5, "static", "rev", 4.0, 0.75}};
  const auto path = std::filesystem::temp_directory_path() / "derev_metrics_roundtrip.jsonl";
  {
    std::ofstream out(path);
    write_metrics_jsonl(out, records);
  }
  const auto back = read_metrics_jsonl(path);
  std::filesystem::remove(path);
  REQUIRE(back.size() == 2);
  CHECK(back[0].utterance == "utt_0001");
  CHECK(back[0].scenario == "time-varying");
  CHECK(back[0].si_sdr == -3.25);
  CHECK(back[1].rt60 == 0.5);
  CHECK_THROWS_AS(read_metrics_jsonl(path), DataError);
}

}  // namespace
}  // namespace derev
