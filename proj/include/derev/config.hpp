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

// Project configuration: paths, analysis settings, rooms, scenarios and the
// training recipe. Stored as JSON (comments allowed); every field has a
// default from the selected profile. Environment variables prefixed with
// DEREV_ override individual fields after the file is read.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "derev/corpus.hpp"
#include "derev/train.hpp"
#include "derev/types.hpp"

namespace derev {

struct PositionCounts {
  int train = 0;
  int validation = 0;
  int test = 0;

  bool operator==(const PositionCounts&) const = default;
};

// One simulated room: its geometry, the reverberation times to render and
// how many source/mic placements feed each split.
struct RoomGroup {
  std::string name;
  Eigen::Vector3d dimensions{8.0, 6.0, 4.0};
  std::vector<double> rt60s;
  PositionCounts positions;

  bool operator==(const RoomGroup&) const = default;
};

struct SceneConfig {
  bool enabled = true;
  int rirs_per_scene = 2;      // test RIRs cycled within one scene
  double switch_period = 1.0;  // s

  bool operator==(const SceneConfig&) const = default;
};

struct CorpusConfig {
  CorpusCounts counts;
  double synthetic_duration = 3.0;  // s, used by synth-corpus

  bool operator==(const CorpusConfig& o) const {
    return counts.train == o.counts.train && counts.validation == o.counts.validation &&
           counts.test == o.counts.test && synthetic_duration == o.synthetic_duration;
  }
};

struct ProjectConfig {
  std::string profile = "desk";
  std::filesystem::path corpus_dir = "corpus";
  std::filesystem::path work_dir = "work";
  std::uint64_t seed = 0;
  StftConfig stft;
  TrainConfig train;
  CorpusConfig corpus;
  std::vector<RoomGroup> rooms;
  SceneConfig scenes;
  std::vector<std::string> methods{"rev", "dsm", "dirm", "ifilt"};

  bool operator==(const ProjectConfig&) const = default;
};

// 40/8/8 utterances, both rooms at RT60 0.5 and 1.0 s, 20 epochs.
ProjectConfig desk_profile();

// The published protocol: 4620/400/192 utterances, three RT60s with 15
// positions each in the first room, ten test positions in the second, 200
// epochs with batch 32.
ProjectConfig paper_profile();

ProjectConfig profile_by_name(const std::string& name);

void validate(const ProjectConfig& config);

std::string to_json(const ProjectConfig& config);

// Fields absent from `text` keep their values in `base`. Unknown keys are a
// ConfigError so that typos do not pass silently.
ProjectConfig config_from_json(const std::string& text, const ProjectConfig& base);

// Reads a config file. The profile named in the file (or `profile` when
// non-empty) supplies the defaults. Then environment overrides apply.
ProjectConfig load_config(const std::filesystem::path& path, const std::string& profile = "");

// DEREV_PROFILE is consumed by load_config; the rest map onto fields:
// DEREV_CORPUS_DIR, DEREV_WORK_DIR, DEREV_SEED, DEREV_EPOCHS,
// DEREV_BATCH_SIZE, DEREV_LR, DEREV_CHECKPOINT_EVERY.
void apply_env_overrides(ProjectConfig& config);

// The file shipped under config/: desk values active, paper values in
// comments.
std::string sample_config_text();

}  // namespace derev
