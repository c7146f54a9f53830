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

// RIR planning, dataset manifests and the persisted example store.
//
// Splits are disjoint by utterance (separate corpus directories) and by RIR
// (each placement belongs to exactly one split). Training and validation
// utterances are paired with one RIR drawn from the pooled split; every test
// utterance meets every test RIR and every test scene.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "derev/config.hpp"
#include "derev/room.hpp"

namespace derev {

struct RirRecord {
  std::string id;  // e.g. room1_rt0500_test_p01
  std::string room;
  double rt60 = 0.0;
  std::string split;
  int position = 0;
  RoomSpec spec;       // geometry, placement and seed
  std::string digest;  // of the stored taps, filled when rendered
};

// Deterministic in config.seed; placements follow the room-sim margins.
std::vector<RirRecord> plan_rirs(const ProjectConfig& config);

// Simulated taps with the physical propagation delay kept.
RirFilter render_rir(const RirRecord& record, Index early_len);

struct SceneRecord {
  std::string id;
  std::string room;
  double rt60 = 0.0;
  std::vector<std::string> rir_ids;
  double switch_period = 1.0;
};

// Test RIRs of each (room, rt60) group in consecutive runs of
// rirs_per_scene; a shorter remainder is dropped.
std::vector<SceneRecord> plan_scenes(const ProjectConfig& config, const std::vector<RirRecord>& rirs);

struct DatasetEntry {
  std::string id;
  std::string utterance;  // corpus WAV path
  std::string split;
  std::string scenario;  // static or time-varying
  std::string source;    // RIR or scene id
  std::string room;
  double rt60 = 0.0;
  std::string reverberant_file;  // relative to the dataset directory
  std::string early_file;
  std::string digest;  // over y and y^E, filled by build_dataset
};

struct DatasetManifest {
  std::uint64_t seed = 0;
  StftConfig stft;
  Index early_len = 32;
  std::vector<RirRecord> rirs;
  std::vector<SceneRecord> scenes;
  std::vector<DatasetEntry> entries;

  std::vector<const DatasetEntry*> split(const std::string& name) const;
};

struct CorpusLists {
  std::vector<std::filesystem::path> train, validation, test;
};

CorpusLists list_corpus_splits(const ProjectConfig& config);

// Entry count: train + validation utterances (one RIR each) plus test
// utterances times (test RIRs + scenes).
DatasetManifest plan_dataset(const ProjectConfig& config, const std::vector<RirRecord>& rirs,
                             const std::vector<SceneRecord>& scenes, const CorpusLists& corpus);

// Throws DataError when an utterance or RIR appears in two splits.
void check_disjoint(const DatasetManifest& manifest);

// Renders every entry with rirs_dir/<id>.wav (propagation delay trimmed
// before the early/late split) and writes y and y^E as float WAVs under
// dataset_dir. Digests are filled in.
void build_dataset(DatasetManifest& manifest, const std::filesystem::path& rirs_dir,
                   const std::filesystem::path& dataset_dir);

void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);
DatasetManifest load_manifest(const std::filesystem::path& path);

// Reads one entry's (y, y^E) pair back from the store.
std::pair<Waveform, Waveform> load_entry(const std::filesystem::path& dataset_dir, const DatasetEntry& entry);

// Digest of a whole manifest's example checksums, for regeneration checks.
std::string manifest_digest(const DatasetManifest& manifest);

}  // namespace derev
