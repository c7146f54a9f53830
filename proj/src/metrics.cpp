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

#include "derev/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <tuple>

#include "json.hpp"

namespace derev {

double si_sdr(const Waveform& estimate, const Waveform& reference) {
  const Index n = std::min(estimate.size(), reference.size());
  if (n == 0) throw DataError("SI-SDR needs non-empty signals");
  const auto e = estimate.samples.head(n);
  const auto r = reference.samples.head(n);
  const double rr = r.squaredNorm();
  if (!(rr > 0.0)) throw DataError("SI-SDR is undefined for a silent reference");
  const RealVector target = (e.dot(r) / rr) * r;
  const double signal = target.squaredNorm();
  const double noise = (target - e).squaredNorm();
  if (signal == 0.0) return -kSiSdrLimit;
  if (noise == 0.0) return kSiSdrLimit;
  return std::clamp(10.0 * std::log10(signal / noise), -kSiSdrLimit, kSiSdrLimit);
}

namespace {

const std::vector<std::string>& method_order() {
  static const std::vector<std::string> order{"rev", "dsm", "dirm", "ifilt"};
  return order;
}

int method_rank(const std::string& method) {
  const auto& order = method_order();
  const auto it = std::find(order.begin(), order.end(), method);
  return it == order.end() ? static_cast<int>(order.size()) : static_cast<int>(it - order.begin());
}

long rt60_ms(double rt60) { return std::lround(rt60 * 1000.0); }

}  // namespace

std::string method_label(const std::string& method) {
  if (method == "rev") return "Rev.";
  if (method == "dsm") return "DSM";
  if (method == "dirm") return "dIRM";
  if (method == "ifilt") return "iFilt";
  return method;
}

std::vector<AggregateRow> aggregate(const std::vector<MetricRecord>& records) {
  if (records.empty()) throw DataError("no metric records to aggregate");
  std::vector<std::string> scenarios, rooms;
  const auto note = [](std::vector<std::string>& seen, const std::string& v) {
    if (std::find(seen.begin(), seen.end(), v) == seen.end()) seen.push_back(v);
  };
  for (const auto& r : records) {
    note(scenarios, r.scenario);
    note(rooms, r.room);
  }
  const auto index_of = [](const std::vector<std::string>& seen, const std::string& v) {
    return std::find(seen.begin(), seen.end(), v) - seen.begin();
  };
  using Key = std::tuple<long, long, long, int, std::string>;
  std::map<Key, AggregateRow> cells;
  for (const auto& r : records) {
    const Key key{index_of(scenarios, r.scenario), index_of(rooms, r.room), rt60_ms(r.rt60), method_rank(r.method),
                  r.method};
    AggregateRow& row = cells[key];
    if (row.count == 0) {
      row.scenario = r.scenario;
      row.room = r.room;
      row.rt60 = r.rt60;
      row.method = r.method;
    }
    row.si_sdr += r.si_sdr;
    row.estoi += r.estoi;
    ++row.count;
  }
  std::vector<AggregateRow> rows;
  for (auto& [key, row] : cells) {
    row.si_sdr /= row.count;
    row.estoi /= row.count;
    rows.push_back(row);
  }
  return rows;
}

void write_metrics_csv(std::ostream& out, const std::vector<AggregateRow>& rows) {
  out << "scenario,room,rt60_ms,metric,method,value,count\n";
  out << std::setprecision(8);
  for (const auto& r : rows) {
    out << r.scenario << ',' << r.room << ',' << rt60_ms(r.rt60) << ",SI-SDR," << r.method << ',' << r.si_sdr << ','
        << r.count << '\n';
    out << r.scenario << ',' << r.room << ',' << rt60_ms(r.rt60) << ",ESTOI," << r.method << ',' << r.estoi << ','
        << r.count << '\n';
    out << r.scenario << ',' << r.room << ',' << rt60_ms(r.rt60) << ",SRMR," << r.method << ",," << r.count << '\n';
  }
}

void write_metrics_table(std::ostream& out, const std::vector<AggregateRow>& rows) {
  std::vector<std::string> methods;
  for (const auto& m : method_order()) {
    if (std::any_of(rows.begin(), rows.end(), [&](const AggregateRow& r) { return r.method == m; })) {
      methods.push_back(m);
    }
  }
  for (const auto& r : rows) {
    if (method_rank(r.method) == static_cast<int>(method_order().size()) &&
        std::find(methods.begin(), methods.end(), r.method) == methods.end()) {
      methods.push_back(r.method);
    }
  }
  const auto lookup = [&](const std::string& scenario, const std::string& room, long rt, const std::string& method)
      -> const AggregateRow* {
    for (const auto& r : rows) {
      if (r.scenario == scenario && r.room == room && rt60_ms(r.rt60) == rt && r.method == method) return &r;
    }
    return nullptr;
  };

  out << "SDR is scale-invariant SDR (dB) against the early reverberant reference y^E.\n";
  out << "SRMR is not computed (blank column, see note).\n";
  std::vector<std::string> scenarios;
  for (const auto& r : rows) {
    if (std::find(scenarios.begin(), scenarios.end(), r.scenario) == scenarios.end()) scenarios.push_back(r.scenario);
  }
  for (const auto& scenario : scenarios) {
    out << "\nAverage results, " << scenario << " RIRs\n";
    std::ostringstream header;
    header << std::left << std::setw(10) << "Room" << std::setw(10) << "RT60(ms)" << std::setw(8) << "Eval.";
    for (const auto& m : methods) header << std::right << std::setw(9) << method_label(m);
    const std::string head = header.str();
    out << head << '\n' << std::string(head.size(), '-') << '\n';
    std::vector<std::pair<std::string, long>> groups;
    for (const auto& r : rows) {
      if (r.scenario != scenario) continue;
      const std::pair<std::string, long> g{r.room, rt60_ms(r.rt60)};
      if (std::find(groups.begin(), groups.end(), g) == groups.end()) groups.push_back(g);
    }
    for (const auto& [room, rt] : groups) {
      for (const char* metric : {"SDR", "ESTOI", "SRMR"}) {
        out << std::left << std::setw(10) << room << std::setw(10) << rt << std::setw(8) << metric;
        for (const auto& m : methods) {
          const AggregateRow* cell = lookup(scenario, room, rt, m);
          out << std::right << std::setw(9);
          if (!cell || std::string(metric) == "SRMR") {
            out << "";
          } else if (std::string(metric) == "SDR") {
            out << std::fixed << std::setprecision(2) << cell->si_sdr;
          } else {
            out << std::fixed << std::setprecision(2) << cell->estoi;
          }
          out.unsetf(std::ios::floatfield);
        }
        out << '\n';
      }
    }
  }
  out << "\nNote: SRMR needs an external modulation filterbank standard and is left blank.\n";
}

void write_metrics_jsonl(std::ostream& out, const std::vector<MetricRecord>& records) {
  for (const auto& r : records) {
    const nlohmann::ordered_json j = {{"utterance", r.utterance}, {"room", r.room},   {"rt60", r.rt60},
                                      {"scenario", r.scenario},   {"method", r.method}, {"si_sdr", r.si_sdr},
                                      {"estoi", r.estoi}};
    out << j.dump() << '\n';
  }
}

std::vector<MetricRecord> read_metrics_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open metrics file " + path.string());
  std::vector<MetricRecord> records;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      records.push_back({j.at("utterance"), j.at("room"), j.at("rt60"), j.at("scenario"), j.at("method"),
                         j.at("si_sdr"), j.at("estoi")});
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

}  // namespace derev
