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
#include <iosfwd>
#include <string>
#include <vector>

#include "derev/types.hpp"

namespace derev {

// Scale-invariant SDR is reported within [-60, 60] dB.
constexpr double kSiSdrLimit = 60.0;

// 10 log10(|a r|^2 / |a r - e|^2) with a = <e, r> / <r, r>. Signals are
// truncated to the shorter length; a silent reference is an error.
double si_sdr(const Waveform& estimate, const Waveform& reference);

// Rational resampling by up/down with a Kaiser-windowed sinc low-pass
// (60 dB rejection), aligned so output sample j sits at input time j*down/up.
RealVector resample(const RealVector& x, int up, int down);

// Extended short-time objective intelligibility. Both signals are resampled
// to 10 kHz, silent frames (40 dB below the loudest reference frame) are
// dropped, and 384 ms segments of one-third-octave envelopes are row- and
// column-normalized before correlation.
double estoi(const Waveform& estimate, const Waveform& reference);

struct MetricRecord {
  std::string utterance;
  std::string room;
  double rt60 = 0.0;
  std::string scenario;  // "static" or "time-varying"
  std::string method;    // rev, dsm, dirm, ifilt
  double si_sdr = 0.0;
  double estoi = 0.0;
};

struct AggregateRow {
  std::string scenario;
  std::string room;
  double rt60 = 0.0;
  std::string method;
  double si_sdr = 0.0;
  double estoi = 0.0;
  int count = 0;
};

// Means per (scenario, room, rt60, method), ordered by first appearance of
// the scenario and room, then rt60, then the fixed method order.
std::vector<AggregateRow> aggregate(const std::vector<MetricRecord>& records);

std::string method_label(const std::string& method);

// Long CSV: scenario,room,rt60_ms,metric,method,value,count.
void write_metrics_csv(std::ostream& out, const std::vector<AggregateRow>& rows);

// Aligned text in the paper's layout: one block per scenario, rows of
// room / RT60 / metric, one column per method. SRMR is left blank.
void write_metrics_table(std::ostream& out, const std::vector<AggregateRow>& rows);

void write_metrics_jsonl(std::ostream& out, const std::vector<MetricRecord>& records);
std::vector<MetricRecord> read_metrics_jsonl(const std::filesystem::path& path);

}  // namespace derev
