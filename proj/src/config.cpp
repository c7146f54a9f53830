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

#include "derev/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "derev/nn/grid.hpp"
#include "json.hpp"

namespace derev {
namespace {

using Json = nlohmann::ordered_json;

RoomGroup room1(std::vector<double> rt60s, PositionCounts positions) {
  return {"room1", {8.0, 6.0, 4.0}, std::move(rt60s), positions};
}

RoomGroup room2(std::vector<double> rt60s, PositionCounts positions) {
  return {"room2", {6.0, 4.0, 3.5}, std::move(rt60s), positions};
}

// Throws on keys outside `allowed`.
void check_keys(const Json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  const std::set<std::string> known(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ConfigError("unknown config key '" + where + "." + key + "'");
  }
}

template <typename T>
void read(const Json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("config key '" + where + "." + key + "' has the wrong type");
  }
}

Json stft_json(const StftConfig& s) {
  return {{"window_len", s.window_len}, {"hop", s.hop}, {"fft_len", s.fft_len}, {"window", "hamming"}};
}

Json train_json(const TrainConfig& t) {
  return {{"epochs", t.epochs},
          {"batch_size", t.batch_size},
          {"context", t.context},
          {"taps", t.taps},
          {"early_len", t.early_len},
          {"lr", {{"initial", t.lr.initial}, {"decay", t.lr.decay}, {"period", t.lr.period}}},
          {"checkpoint_every", t.checkpoint_every},
          {"channels", t.channels}};
}

void read_stft(const Json& j, StftConfig& s) {
  check_keys(j, "stft", {"window_len", "hop", "fft_len", "window"});
  read(j, "window_len", s.window_len, "stft");
  read(j, "hop", s.hop, "stft");
  read(j, "fft_len", s.fft_len, "stft");
  if (j.contains("window") && j.at("window") != "hamming") throw ConfigError("stft.window must be \"hamming\"");
}

void read_train(const Json& j, TrainConfig& t) {
  check_keys(j, "train",
             {"epochs", "batch_size", "context", "taps", "early_len", "lr", "checkpoint_every", "channels"});
  read(j, "epochs", t.epochs, "train");
  read(j, "batch_size", t.batch_size, "train");
  read(j, "context", t.context, "train");
  read(j, "taps", t.taps, "train");
  read(j, "early_len", t.early_len, "train");
  read(j, "checkpoint_every", t.checkpoint_every, "train");
  read(j, "channels", t.channels, "train");
  if (j.contains("lr")) {
    const Json& lr = j.at("lr");
    check_keys(lr, "train.lr", {"initial", "decay", "period"});
    read(lr, "initial", t.lr.initial, "train.lr");
    read(lr, "decay", t.lr.decay, "train.lr");
    read(lr, "period", t.lr.period, "train.lr");
  }
}

RoomGroup read_room(const Json& j) {
  check_keys(j, "rooms[]", {"name", "dimensions", "rt60s", "positions"});
  RoomGroup room;
  read(j, "name", room.name, "rooms[]");
  std::vector<double> dims{room.dimensions[0], room.dimensions[1], room.dimensions[2]};
  read(j, "dimensions", dims, "rooms[]");
  if (dims.size() != 3) throw ConfigError("rooms[].dimensions needs three values");
  room.dimensions = {dims[0], dims[1], dims[2]};
  read(j, "rt60s", room.rt60s, "rooms[]");
  if (j.contains("positions")) {
    const Json& p = j.at("positions");
    check_keys(p, "rooms[].positions", {"train", "validation", "test"});
    read(p, "train", room.positions.train, "rooms[].positions");
    read(p, "validation", room.positions.validation, "rooms[].positions");
    read(p, "test", room.positions.test, "rooms[].positions");
  }
  return room;
}

std::string env(const char* name) {
  const char* v = std::getenv(name);
  return v ? std::string(v) : std::string();
}

template <typename T>
T parse_number(const std::string& text, const char* name) {
  try {
    std::size_t used = 0;
    T value;
    if constexpr (std::is_floating_point_v<T>) {
      value = static_cast<T>(std::stod(text, &used));
    } else {
      value = static_cast<T>(std::stoll(text, &used));
    }
    if (used != text.size()) throw std::invalid_argument(text);
    return value;
  } catch (const std::exception&) {
    throw ConfigError(std::string(name) + "='" + text + "' is not a number");
  }
}

}  // namespace

ProjectConfig desk_profile() {
  ProjectConfig c;
  c.profile = "desk";
  c.train.channels = nn::default_channel_plan();
  c.train.epochs = 20;
  c.train.batch_size = 8;
  c.train.checkpoint_every = 5;
  c.corpus.counts = {40, 8, 8};
  c.rooms = {room1({0.5, 1.0}, {3, 1, 2}), room2({0.5, 1.0}, {0, 0, 2})};
  c.scenes.rirs_per_scene = 2;
  return c;
}

ProjectConfig paper_profile() {
  ProjectConfig c;
  c.profile = "paper";
  c.train.channels = nn::default_channel_plan();
  c.train.epochs = 200;
  c.train.batch_size = 32;
  c.train.checkpoint_every = 10;
  c.corpus.counts = {4620, 400, 192};
  c.rooms = {room1({0.5, 0.75, 1.0}, {15, 10, 10}), room2({0.5, 0.75, 1.0}, {0, 0, 10})};
  c.scenes.rirs_per_scene = 5;
  return c;
}

ProjectConfig profile_by_name(const std::string& name) {
  if (name == "desk") return desk_profile();
  if (name == "paper") return paper_profile();
  throw ConfigError("unknown profile '" + name + "' (expected desk or paper)");
}

void validate(const ProjectConfig& c) {
  validate(c.stft);
  validate(c.train);
  if (c.corpus.counts.train < 2 || c.corpus.counts.validation < 0 || c.corpus.counts.test < 1) {
    throw ConfigError("corpus counts need at least 2 train and 1 test utterance");
  }
  if (c.corpus.synthetic_duration <= 0.0) throw ConfigError("corpus.synthetic_duration must be positive");
  if (c.rooms.empty()) throw ConfigError("at least one room is required");
  std::set<std::string> names;
  int train_positions = 0, test_positions = 0;
  for (const auto& r : c.rooms) {
    if (r.name.empty() || !names.insert(r.name).second) throw ConfigError("room names must be unique and non-empty");
    if ((r.dimensions.array() <= 0.0).any()) throw ConfigError("room " + r.name + " has non-positive dimensions");
    if (r.rt60s.empty()) throw ConfigError("room " + r.name + " lists no rt60s");
    for (double t : r.rt60s) {
      if (!(t > 0.0)) throw ConfigError("room " + r.name + " has a non-positive rt60");
    }
    if (r.positions.train < 0 || r.positions.validation < 0 || r.positions.test < 0) {
      throw ConfigError("room " + r.name + " has negative position counts");
    }
    train_positions += r.positions.train;
    test_positions += r.positions.test;
  }
  if (train_positions == 0) throw ConfigError("no room supplies training positions");
  if (test_positions == 0) throw ConfigError("no room supplies test positions");
  if (c.scenes.rirs_per_scene < 1 || !(c.scenes.switch_period > 0.0)) {
    throw ConfigError("scenes need rirs_per_scene >= 1 and a positive switch_period");
  }
  if (c.methods.empty()) throw ConfigError("no evaluation methods configured");
  for (const auto& m : c.methods) {
    if (m != "rev") parse_head(m);
  }
}

std::string to_json(const ProjectConfig& c) {
  Json rooms = Json::array();
  for (const auto& r : c.rooms) {
    rooms.push_back({{"name", r.name},
                     {"dimensions", {r.dimensions[0], r.dimensions[1], r.dimensions[2]}},
                     {"rt60s", r.rt60s},
                     {"positions",
                      {{"train", r.positions.train},
                       {"validation", r.positions.validation},
                       {"test", r.positions.test}}}});
  }
  const Json j = {
      {"profile", c.profile},
      {"corpus_dir", c.corpus_dir.string()},
      {"work_dir", c.work_dir.string()},
      {"seed", c.seed},
      {"stft", stft_json(c.stft)},
      {"train", train_json(c.train)},
      {"corpus",
       {{"train", c.corpus.counts.train},
        {"validation", c.corpus.counts.validation},
        {"test", c.corpus.counts.test},
        {"synthetic_duration", c.corpus.synthetic_duration}}},
      {"rooms", rooms},
      {"scenes",
       {{"enabled", c.scenes.enabled},
        {"rirs_per_scene", c.scenes.rirs_per_scene},
        {"switch_period", c.scenes.switch_period}}},
      {"methods", c.methods}};
  return j.dump(2) + "\n";
}

ProjectConfig config_from_json(const std::string& text, const ProjectConfig& base) {
  Json j;
  try {
    j = Json::parse(text, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(j, "config",
             {"profile", "corpus_dir", "work_dir", "seed", "stft", "train", "corpus", "rooms", "scenes", "methods"});
  ProjectConfig c = base;
  read(j, "profile", c.profile, "config");
  std::string path;
  if (j.contains("corpus_dir")) {
    read(j, "corpus_dir", path, "config");
    c.corpus_dir = path;
  }
  if (j.contains("work_dir")) {
    read(j, "work_dir", path, "config");
    c.work_dir = path;
  }
  read(j, "seed", c.seed, "config");
  if (j.contains("stft")) read_stft(j.at("stft"), c.stft);
  if (j.contains("train")) read_train(j.at("train"), c.train);
  if (j.contains("corpus")) {
    const Json& k = j.at("corpus");
    check_keys(k, "corpus", {"train", "validation", "test", "synthetic_duration"});
    read(k, "train", c.corpus.counts.train, "corpus");
    read(k, "validation", c.corpus.counts.validation, "corpus");
    read(k, "test", c.corpus.counts.test, "corpus");
    read(k, "synthetic_duration", c.corpus.synthetic_duration, "corpus");
  }
  if (j.contains("rooms")) {
    if (!j.at("rooms").is_array()) throw ConfigError("rooms must be an array");
    c.rooms.clear();
    for (const auto& r : j.at("rooms")) c.rooms.push_back(read_room(r));
  }
  if (j.contains("scenes")) {
    const Json& s = j.at("scenes");
    check_keys(s, "scenes", {"enabled", "rirs_per_scene", "switch_period"});
    read(s, "enabled", c.scenes.enabled, "scenes");
    read(s, "rirs_per_scene", c.scenes.rirs_per_scene, "scenes");
    read(s, "switch_period", c.scenes.switch_period, "scenes");
  }
  read(j, "methods", c.methods, "config");
  return c;
}

ProjectConfig load_config(const std::filesystem::path& path, const std::string& profile) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream text;
  text << in.rdbuf();
  std::string name = profile.empty() ? env("DEREV_PROFILE") : profile;
  if (name.empty()) {
    try {
      const Json j = Json::parse(text.str(), nullptr, true, true);
      name = j.value("profile", std::string("desk"));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(path.string() + ": " + e.what());
    }
  }
  ProjectConfig c = config_from_json(text.str(), profile_by_name(name));
  c.profile = name;
  // Relative paths are taken from the config file's directory.
  const auto base = path.parent_path();
  if (c.corpus_dir.is_relative()) c.corpus_dir = base / c.corpus_dir;
  if (c.work_dir.is_relative()) c.work_dir = base / c.work_dir;
  apply_env_overrides(c);
  validate(c);
  return c;
}

void apply_env_overrides(ProjectConfig& c) {
  if (auto v = env("DEREV_CORPUS_DIR"); !v.empty()) c.corpus_dir = v;
  if (auto v = env("DEREV_WORK_DIR"); !v.empty()) c.work_dir = v;
  if (auto v = env("DEREV_SEED"); !v.empty()) c.seed = parse_number<std::uint64_t>(v, "DEREV_SEED");
  if (auto v = env("DEREV_EPOCHS"); !v.empty()) c.train.epochs = parse_number<int>(v, "DEREV_EPOCHS");
  if (auto v = env("DEREV_BATCH_SIZE"); !v.empty()) c.train.batch_size = parse_number<int>(v, "DEREV_BATCH_SIZE");
  if (auto v = env("DEREV_LR"); !v.empty()) c.train.lr.initial = parse_number<double>(v, "DEREV_LR");
  if (auto v = env("DEREV_CHECKPOINT_EVERY"); !v.empty()) {
    c.train.checkpoint_every = parse_number<int>(v, "DEREV_CHECKPOINT_EVERY");
  }
}

std::string sample_config_text() {
  return R"({
  // Desk-scale defaults. The published protocol is in the comments; the
  // same values load with --profile paper.
  "profile": "desk",
  "corpus_dir": "../corpus",  // <corpus>/{train,validation,test}/*.wav, 16 kHz mono
  "work_dir": "../work",
  "seed": 0,
  "stft": {"window_len": 400, "hop": 160, "fft_len": 512, "window": "hamming"},
  "train": {
    "epochs": 20,             // paper: 200
    "batch_size": 8,          // paper: 32
    "context": 5,
    "taps": 9,
    "early_len": 32,          // paper also reports 64 and 128
    "lr": {"initial": 0.001, "decay": 0.9, "period": 10},
    "checkpoint_every": 5,    // paper profile: 10
    "channels": [16, 16, 32, 32, 64, 64, 64, 32, 32, 16, 16]
  },
  "corpus": {
    "train": 40,              // paper: 4620
    "validation": 8,          // paper: 400
    "test": 8,                // paper: 192
    "synthetic_duration": 3.0
  },
  "rooms": [
    // paper: "rt60s": [0.5, 0.75, 1.0], "positions": {"train": 15, "validation": 10, "test": 10}
    {"name": "room1", "dimensions": [8.0, 6.0, 4.0], "rt60s": [0.5, 1.0],
     "positions": {"train": 3, "validation": 1, "test": 2}},
    // paper: "rt60s": [0.5, 0.75, 1.0], "positions": {"train": 0, "validation": 0, "test": 10}
    {"name": "room2", "dimensions": [6.0, 4.0, 3.5], "rt60s": [0.5, 1.0],
     "positions": {"train": 0, "validation": 0, "test": 2}}
  ],
  "scenes": {
    "enabled": true,
    "rirs_per_scene": 2,      // paper: 5
    "switch_period": 1.0
  },
  "methods": ["rev", "dsm", "dirm", "ifilt"]
}
)";
}

}  // namespace derev
