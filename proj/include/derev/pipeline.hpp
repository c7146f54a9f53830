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

// End-to-end commands behind the CLI. Every command reads a ProjectConfig,
// writes under its work directory and records its outputs (with digests)
// in <work>/index.json. A lock file keeps two commands from mutating the
// same work directory at once.

#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "derev/config.hpp"
#include "derev/dataset.hpp"
#include "derev/metrics.hpp"
#include "derev/train.hpp"

namespace derev {

struct WorkLayout {
  std::filesystem::path root;

  std::filesystem::path rirs() const { return root / "rirs"; }
  std::filesystem::path dataset() const { return root / "dataset"; }
  std::filesystem::path manifest() const { return dataset() / "manifest.json"; }
  std::filesystem::path models(Head head) const { return root / "models" / to_string(head); }
  std::filesystem::path eval() const { return root / "eval"; }
  std::filesystem::path index() const { return root / "index.json"; }
};

// Exclusive <work>/.lock for the lifetime of the object.
class WorkLock {
 public:
  explicit WorkLock(const std::filesystem::path& work_dir);
  ~WorkLock();
  WorkLock(const WorkLock&) = delete;
  WorkLock& operator=(const WorkLock&) = delete;

 private:
  std::filesystem::path path_;
};

// Records `files` (relative to the work dir) and their digests under
// `stage` in the index, replacing that stage's previous entry.
void update_index(const std::filesystem::path& work_dir, const std::string& stage,
                  const std::vector<std::filesystem::path>& files);

int cmd_synth_corpus(const ProjectConfig& config, std::ostream& log);

// RIR WAVs (float) plus a JSON sidecar per RIR. Returns the RIR count.
int cmd_simulate_rirs(const ProjectConfig& config, std::ostream& log);

DatasetManifest cmd_build_dataset(const ProjectConfig& config, std::ostream& log);

// Training examples of one split for a head, read from the store.
std::vector<TrainingExample> load_examples(const ProjectConfig& config, const DatasetManifest& manifest,
                                           const std::string& split, Head head);

TrainReport cmd_train(const ProjectConfig& config, Head head, bool resume, std::ostream& log);

// identity = true bypasses the network with W = delta(p) (taps from the
// checkpoint, or `taps` when no checkpoint is given).
void cmd_dereverb(const std::filesystem::path& checkpoint, const std::filesystem::path& input,
                  const std::filesystem::path& output, bool identity, Index taps = 9);

// All configured methods over the test split. Writes metrics.jsonl,
// metrics.csv and tables.txt under <work>/eval.
std::vector<MetricRecord> cmd_evaluate(const ProjectConfig& config, std::ostream& log);

// Rebuilds the CSV and text tables from metrics.jsonl; returns the table.
std::string cmd_report(const ProjectConfig& config, std::ostream& log);

}  // namespace derev
