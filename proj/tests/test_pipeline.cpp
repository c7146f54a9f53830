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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "derev/config.hpp"
#include "derev/dataset.hpp"
#include "derev/pipeline.hpp"
#include "derev/wav.hpp"
#include "doctest.h"
#include "test_support.hpp"

namespace derev {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("derev_test_pipeline_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

ProjectConfig tiny(const fs::path& root) {
  ProjectConfig c = desk_profile();
  c.corpus_dir = root / "corpus";
  c.work_dir = root / "work";
  c.seed = 5;
  c.train.epochs = 1;
  c.train.batch_size = 2;
  c.train.checkpoint_every = 1;
  c.train.channels = std::vector<Index>(11, 4);
  c.corpus.counts = {4, 2, 2};
  c.corpus.synthetic_duration = 1.0;
  c.rooms = {{"room1", {8.0, 6.0, 4.0}, {0.5}, {2, 1, 2}}};
  return c;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

// Sets an environment variable for the lifetime of the object.
struct ScopedEnv {
  std::string name;
  ScopedEnv(std::string n, const std::string& value) : name(std::move(n)) { ::setenv(name.c_str(), value.c_str(), 1); }
  ~ScopedEnv() { ::unsetenv(name.c_str()); }
};

TEST_CASE("profiles carry the desk and published numbers") {
  const ProjectConfig desk = desk_profile();
  CHECK_NOTHROW(validate(desk));
  CHECK(desk.corpus.counts.train == 40);
  CHECK(desk.corpus.counts.validation == 8);
  CHECK(desk.corpus.counts.test == 8);
  CHECK(desk.train.epochs == 20);
  CHECK(desk.rooms[0].rt60s == std::vector<double>{0.5, 1.0});

  const ProjectConfig paper = paper_profile();
  CHECK_NOTHROW(validate(paper));
  CHECK(paper.corpus.counts.train == 4620);
  CHECK(paper.corpus.counts.validation == 400);
  CHECK(paper.corpus.counts.test == 192);
  CHECK(paper.train.epochs == 200);
  CHECK(paper.train.batch_size == 32);
  CHECK(paper.train.context == 5);
  CHECK(paper.train.taps == 9);
  CHECK(paper.scenes.rirs_per_scene == 5);
  CHECK_THROWS_AS(profile_by_name("laptop"), ConfigError);
}

TEST_CASE("config survives a JSON round trip") {
  ProjectConfig c = paper_profile();
  c.seed = 99;
  c.corpus_dir = "/data/speech";
  c.train.channels = {8, 8, 8, 8, 8, 8, 8, 8, 8, 8, 8};
  c.scenes.enabled = false;
  CHECK(config_from_json(to_json(c), desk_profile()) == c);
  CHECK(config_from_json("{}", c) == c);
}

TEST_CASE("config parsing rejects unknown keys and wrong types") {
  CHECK_THROWS_AS(config_from_json(R"({"epochs": 3})", desk_profile()), ConfigError);
  CHECK_THROWS_AS(config_from_json(R"({"train": {"epoch": 3}})", desk_profile()), ConfigError);
  CHECK_THROWS_AS(config_from_json(R"({"seed": "x"})", desk_profile()), ConfigError);
  CHECK_THROWS_AS(config_from_json(R"({"rooms": [{"dimensions": [1, 2]}]})", desk_profile()), ConfigError);
  CHECK_THROWS_AS(config_from_json("{", desk_profile()), ConfigError);
  ProjectConfig bad = desk_profile();
  bad.methods = {"rev", "wpe"};
  CHECK_THROWS_AS(validate(bad), ConfigError);
  bad = desk_profile();
  bad.rooms[0].rt60s.clear();
  CHECK_THROWS_AS(validate(bad), ConfigError);
}

TEST_CASE("the shipped sample config is the desk profile") {
  const fs::path path = fs::path(DEREV_SOURCE_DIR) / "config" / "derev.jsonc";
  REQUIRE(fs::exists(path));
  CHECK(slurp(path) == sample_config_text());
  const ProjectConfig loaded = load_config(path);
  ProjectConfig expected = desk_profile();
  expected.corpus_dir = path.parent_path() / "../corpus";
  expected.work_dir = path.parent_path() / "../work";
  CHECK(loaded == expected);
  CHECK(load_config(path, "paper").train.epochs == 20);
  CHECK(load_config(path, "paper").profile == "paper");
  CHECK_THROWS_AS(load_config("/nonexistent/derev.jsonc"), ConfigError);
}

TEST_CASE("environment overrides apply after the file") {
  ProjectConfig c = desk_profile();
  {
    ScopedEnv seed("DEREV_SEED", "17");
    ScopedEnv epochs("DEREV_EPOCHS", "3");
    ScopedEnv work("DEREV_WORK_DIR", "/tmp/elsewhere");
    apply_env_overrides(c);
  }
  CHECK(c.seed == 17);
  CHECK(c.train.epochs == 3);
  CHECK(c.work_dir == "/tmp/elsewhere");
  ScopedEnv bad("DEREV_BATCH_SIZE", "many");
  CHECK_THROWS_AS(apply_env_overrides(c), ConfigError);
}

TEST_CASE("rir plans have the configured size") {
  ProjectConfig c = desk_profile();
  // Room 1: 2 RT60s x (3 + 1 + 2) placements, room 2: 2 x 2.
  CHECK(plan_rirs(c).size() == 16);
  c.rooms = {{"room1", {8.0, 6.0, 4.0}, {0.5, 0.75, 1.0}, {15, 0, 0}}};
  CHECK(plan_rirs(c).size() == 45);
  c.rooms = {{"room1", {8.0, 6.0, 4.0}, {0.5, 0.75, 1.0}, {2, 0, 0}}};
  CHECK(plan_rirs(c).size() == 6);
}

TEST_CASE("rir plans are seeded and keep placements apart") {
  const ProjectConfig c = desk_profile();
  const auto a = plan_rirs(c);
  const auto b = plan_rirs(c);
  std::set<std::string> ids;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].spec.source == b[i].spec.source);
    CHECK(a[i].spec.mic == b[i].spec.mic);
    CHECK((a[i].spec.source - a[i].spec.mic).norm() >= 1.0);
    CHECK((a[i].spec.source.array() >= 0.5).all());
    CHECK(((a[i].spec.dimensions - a[i].spec.source).array() >= 0.5).all());
    ids.insert(a[i].id);
  }
  CHECK(ids.size() == a.size());
  ProjectConfig other = c;
  other.seed = 1;
  CHECK(plan_rirs(other)[0].spec.source != a[0].spec.source);
}

TEST_CASE("scenes group the test RIRs of one room and RT60") {
  ProjectConfig c = desk_profile();
  const auto scenes = plan_scenes(c, plan_rirs(c));
  CHECK(scenes.size() == 4);
  for (const auto& s : scenes) {
    CHECK(s.rir_ids.size() == 2);
    for (const auto& id : s.rir_ids) CHECK(id.find("_test_") != std::string::npos);
  }
  const ProjectConfig paper = paper_profile();
  CHECK(plan_scenes(paper, plan_rirs(paper)).size() == 2 * 3 * 2);
  c.scenes.enabled = false;
  CHECK(plan_scenes(c, plan_rirs(c)).empty());
}

TEST_CASE("dataset plans pair utterances by split") {
  const ProjectConfig c = desk_profile();
  const auto rirs = plan_rirs(c);
  const auto scenes = plan_scenes(c, rirs);
  CorpusLists corpus;
  for (int i = 0; i < 40; ++i) corpus.train.push_back("/c/train/u" + std::to_string(i) + ".wav");
  for (int i = 0; i < 8; ++i) corpus.validation.push_back("/c/validation/u" + std::to_string(i) + ".wav");
  for (int i = 0; i < 8; ++i) corpus.test.push_back("/c/test/u" + std::to_string(i) + ".wav");
  const DatasetManifest m = plan_dataset(c, rirs, scenes, corpus);
  CHECK(m.split("train").size() == 40);
  CHECK(m.split("validation").size() == 8);
  // 8 test RIRs and 4 scenes per test utterance.
  CHECK(m.split("test").size() == 8 * (8 + 4));
  for (const auto* e : m.split("train")) CHECK(e->source.find("_train_") != std::string::npos);
  for (const auto* e : m.split("validation")) CHECK(e->source.find("_validation_") != std::string::npos);

  CorpusLists leaky = corpus;
  leaky.test[0] = corpus.train[0];
  CHECK_THROWS_AS(plan_dataset(c, rirs, scenes, leaky), DataError);
}

TEST_CASE("an impulse RIR with Q_e = Q gives y^E = y") {
  const Waveform s = testing::noise_waveform(8000, 3);
  RirFilter h;
  h.taps = RealVector::Zero(4);
  h.taps[0] = 1.0;
  h.early_len = 4;
  const ReverbParts parts = convolve_static(s, h);
  CHECK(parts.early.samples == parts.y.samples);
  CHECK(parts.late.samples.isZero());
  const TrainingExample ex = make_example("a", "train", parts.y, parts.early, Head::kIFilt);
  CHECK(ex.target == ex.magnitude);
}

TEST_CASE("missing corpus names the path") {
  const fs::path root = scratch("missing");
  const ProjectConfig c = tiny(root);
  std::ostringstream log;
  try {
    cmd_build_dataset(c, log);
    FAIL("expected a data error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find(c.corpus_dir.string()) != std::string::npos);
  }
  fs::remove_all(root);
}

TEST_CASE("a held lock blocks a second command") {
  const fs::path root = scratch("lock");
  const ProjectConfig c = tiny(root);
  std::ostringstream log;
  {
    WorkLock lock(c.work_dir);
    CHECK_THROWS_AS(cmd_simulate_rirs(c, log), UsageError);
  }
  CHECK(cmd_simulate_rirs(c, log) == 5);
  fs::remove_all(root);
}

TEST_CASE("the pipeline runs end to end and regenerates identically") {
  const fs::path root = scratch("e2e");
  ProjectConfig c = tiny(root);
  std::ostringstream log;
  CHECK(cmd_synth_corpus(c, log) == 8);
  CHECK(cmd_simulate_rirs(c, log) == 5);
  CHECK(fs::exists(c.work_dir / "rirs" / "room1_rt0500_test_p01.json"));
  const DatasetManifest built = cmd_build_dataset(c, log);
  // 4 train + 2 validation + 2 test utterances x (2 RIRs + 1 scene).
  CHECK(built.entries.size() == 4 + 2 + 2 * 3);
  CHECK(load_manifest(c.work_dir / "dataset" / "manifest.json").entries.size() == built.entries.size());

  ProjectConfig again = c;
  again.work_dir = root / "work2";
  cmd_simulate_rirs(again, log);
  CHECK(manifest_digest(cmd_build_dataset(again, log)) == manifest_digest(built));

  for (Head head : {Head::kIFilt, Head::kDsm, Head::kDirm}) cmd_train(c, head, false, log);
  const std::string index = slurp(c.work_dir / "index.json");
  for (const char* stage : {"simulate-rirs", "build-dataset", "train-ifilt", "train-dirm"}) {
    CHECK(index.find(stage) != std::string::npos);
  }

  // Identity dereverberation reproduces the interior.
  const fs::path in = c.work_dir / "dataset" / built.split("test")[0]->reverberant_file;
  const fs::path ckpt = c.work_dir / "models" / "ifilt" / "best.ckpt";
  cmd_dereverb(ckpt, in, root / "identity.wav", true);
  const Waveform y = read_wav(in);
  const Waveform out = read_wav(root / "identity.wav");
  REQUIRE(out.size() == y.size());
  const Index edge = 400;
  CHECK(testing::relative_rms(out.samples.segment(edge, y.size() - 2 * edge),
                              y.samples.segment(edge, y.size() - 2 * edge)) < 1e-6);
  cmd_dereverb(ckpt, in, root / "a.wav", false);
  cmd_dereverb(ckpt, in, root / "b.wav", false);
  CHECK(slurp(root / "a.wav") == slurp(root / "b.wav"));
  CHECK(read_wav(root / "a.wav").size() == y.size());
  CHECK_THROWS_AS(cmd_dereverb("", in, root / "c.wav", false), UsageError);

  const auto records = cmd_evaluate(c, log);
  // 6 test examples x 4 methods.
  CHECK(records.size() == 6 * 4);
  for (const auto& r : records) {
    CHECK(r.estoi <= 1.0);
    CHECK(r.estoi >= -1.0);
  }
  const std::string csv = slurp(c.work_dir / "eval" / "metrics.csv");
  // Header plus scenarios x rooms x RT60s x metrics x methods.
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 2 * 1 * 1 * 3 * 4);
  const std::string table = slurp(c.work_dir / "eval" / "tables.txt");
  CHECK(table.find("time-varying") != std::string::npos);
  CHECK(cmd_report(c, log) == table);

  // Without scenes the time-varying block disappears.
  c.scenes.enabled = false;
  c.work_dir = root / "work3";
  cmd_simulate_rirs(c, log);
  cmd_build_dataset(c, log);
  c.methods = {"rev"};
  cmd_evaluate(c, log);
  CHECK(slurp(c.work_dir / "eval" / "tables.txt").find("time-varying") == std::string::npos);
  fs::remove_all(root);
}

}  // namespace
}  // namespace derev
