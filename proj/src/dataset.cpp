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

#include "derev/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "derev/corpus.hpp"
#include "derev/digest.hpp"
#include "derev/wav.hpp"
#include "json.hpp"

namespace derev {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

std::uint64_t derive_seed(std::uint64_t seed, const std::string& label) {
  Fnv1a h;
  h.update(&seed, sizeof(seed));
  h.update(label);
  return h.value();
}

std::string rir_id(const std::string& room, double rt60, const std::string& split, int position) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%s_rt%04ld_%s_p%02d", room.c_str(), std::lround(rt60 * 1000.0), split.c_str(),
                position);
  return buf;
}

Json vec3(const Eigen::Vector3d& v) { return Json::array({v[0], v[1], v[2]}); }

Eigen::Vector3d vec3(const Json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

Json rir_json(const RirRecord& r) {
  return {{"id", r.id},
          {"room", r.room},
          {"rt60", r.rt60},
          {"split", r.split},
          {"position", r.position},
          {"dimensions", vec3(r.spec.dimensions)},
          {"source", vec3(r.spec.source)},
          {"mic", vec3(r.spec.mic)},
          {"seed", r.spec.seed},
          {"digest", r.digest}};
}

RirRecord rir_from_json(const Json& j) {
  RirRecord r;
  r.id = j.at("id");
  r.room = j.at("room");
  r.rt60 = j.at("rt60");
  r.split = j.at("split");
  r.position = j.at("position");
  r.spec.dimensions = vec3(j.at("dimensions"));
  r.spec.rt60 = r.rt60;
  r.spec.source = vec3(j.at("source"));
  r.spec.mic = vec3(j.at("mic"));
  r.spec.seed = j.at("seed");
  r.digest = j.at("digest");
  return r;
}

const SceneRecord& find_scene(const DatasetManifest& m, const std::string& id) {
  for (const auto& s : m.scenes) {
    if (s.id == id) return s;
  }
  throw DataError("manifest references unknown scene " + id);
}

RirFilter load_rir(const fs::path& rirs_dir, const std::string& id, Index early_len) {
  const fs::path path = rirs_dir / (id + ".wav");
  if (!fs::exists(path)) throw DataError("missing RIR " + path.string() + " (run `derev simulate-rirs` first)");
  RirFilter h;
  h.taps = read_wav(path).samples;
  h.early_len = std::min(early_len, h.taps.size());
  return trim_propagation_delay(h);
}

}  // namespace

std::vector<RirRecord> plan_rirs(const ProjectConfig& config) {
  std::vector<RirRecord> out;
  for (const auto& room : config.rooms) {
    for (double rt60 : room.rt60s) {
      const std::pair<const char*, int> splits[] = {
          {"train", room.positions.train}, {"validation", room.positions.validation}, {"test", room.positions.test}};
      for (const auto& [split, count] : splits) {
        for (int p = 0; p < count; ++p) {
          RirRecord r;
          r.id = rir_id(room.name, rt60, split, p);
          r.room = room.name;
          r.rt60 = rt60;
          r.split = split;
          r.position = p;
          r.spec.dimensions = room.dimensions;
          r.spec.rt60 = rt60;
          r.spec.seed = derive_seed(config.seed, r.id);
          place_randomly(r.spec, r.spec.seed);
          out.push_back(std::move(r));
        }
      }
    }
  }
  return out;
}

RirFilter render_rir(const RirRecord& record, Index early_len) { return simulate_rir(record.spec, early_len); }

std::vector<SceneRecord> plan_scenes(const ProjectConfig& config, const std::vector<RirRecord>& rirs) {
  std::vector<SceneRecord> out;
  if (!config.scenes.enabled) return out;
  for (const auto& room : config.rooms) {
    for (double rt60 : room.rt60s) {
      std::vector<std::string> group;
      for (const auto& r : rirs) {
        if (r.split == "test" && r.room == room.name && r.rt60 == rt60) group.push_back(r.id);
      }
      const auto per = static_cast<std::size_t>(config.scenes.rirs_per_scene);
      for (std::size_t start = 0; start + per <= group.size(); start += per) {
        SceneRecord s;
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%s_rt%04ld_scene%02zu", room.name.c_str(), std::lround(rt60 * 1000.0),
                      start / per);
        s.id = buf;
        s.room = room.name;
        s.rt60 = rt60;
        s.rir_ids.assign(group.begin() + static_cast<std::ptrdiff_t>(start),
                         group.begin() + static_cast<std::ptrdiff_t>(start + per));
        s.switch_period = config.scenes.switch_period;
        out.push_back(std::move(s));
      }
    }
  }
  return out;
}

std::vector<const DatasetEntry*> DatasetManifest::split(const std::string& name) const {
  std::vector<const DatasetEntry*> out;
  for (const auto& e : entries) {
    if (e.split == name) out.push_back(&e);
  }
  return out;
}

CorpusLists list_corpus_splits(const ProjectConfig& config) {
  CorpusLists c;
  c.train = list_corpus(config.corpus_dir, "train", config.corpus.counts.train);
  if (config.corpus.counts.validation > 0) {
    c.validation = list_corpus(config.corpus_dir, "validation", config.corpus.counts.validation);
  }
  c.test = list_corpus(config.corpus_dir, "test", config.corpus.counts.test);
  return c;
}

DatasetManifest plan_dataset(const ProjectConfig& config, const std::vector<RirRecord>& rirs,
                             const std::vector<SceneRecord>& scenes, const CorpusLists& corpus) {
  DatasetManifest m;
  m.seed = config.seed;
  m.stft = config.stft;
  m.early_len = config.train.early_len;
  m.rirs = rirs;
  m.scenes = scenes;

  const auto pool = [&](const std::string& split) {
    std::vector<const RirRecord*> p;
    for (const auto& r : rirs) {
      if (r.split == split) p.push_back(&r);
    }
    return p;
  };
  const auto add = [&](const fs::path& utt, const std::string& split, const std::string& scenario,
                       const std::string& source, const std::string& room, double rt60) {
    DatasetEntry e;
    e.utterance = utt.string();
    e.split = split;
    e.scenario = scenario;
    e.source = source;
    e.room = room;
    e.rt60 = rt60;
    e.id = split + "/" + utt.stem().string() + "__" + source;
    e.reverberant_file = e.id + "_y.wav";
    e.early_file = e.id + "_ye.wav";
    m.entries.push_back(std::move(e));
  };

  for (const std::string split : {"train", "validation"}) {
    const auto& utts = split == "train" ? corpus.train : corpus.validation;
    if (utts.empty()) continue;
    const auto p = pool(split);
    if (p.empty()) throw ConfigError("no RIR positions configured for the " + split + " split");
    std::mt19937_64 rng(derive_seed(config.seed, "pairing/" + split));
    std::uniform_int_distribution<std::size_t> pick(0, p.size() - 1);
    for (const auto& utt : utts) {
      const RirRecord* r = p[pick(rng)];
      add(utt, split, "static", r->id, r->room, r->rt60);
    }
  }
  for (const auto& utt : corpus.test) {
    for (const RirRecord* r : pool("test")) add(utt, "test", "static", r->id, r->room, r->rt60);
    for (const auto& s : scenes) add(utt, "test", "time-varying", s.id, s.room, s.rt60);
  }
  check_disjoint(m);
  return m;
}

void check_disjoint(const DatasetManifest& m) {
  std::map<std::string, std::string> utt_split, rir_split;
  const auto claim = [](std::map<std::string, std::string>& owner, const std::string& key, const std::string& split,
                        const char* what) {
    const auto [it, inserted] = owner.emplace(key, split);
    if (!inserted && it->second != split) {
      throw DataError(std::string(what) + " " + key + " appears in both " + it->second + " and " + split);
    }
  };
  for (const auto& r : m.rirs) claim(rir_split, r.id, r.split, "RIR");
  for (const auto& e : m.entries) {
    claim(utt_split, fs::weakly_canonical(e.utterance).string(), e.split, "utterance");
    if (e.scenario == "static") {
      claim(rir_split, e.source, e.split, "RIR");
    } else {
      for (const auto& id : find_scene(m, e.source).rir_ids) claim(rir_split, id, e.split, "RIR");
    }
  }
  // Identical placements in two splits would leak a room response.
  std::map<std::string, std::string> placements;
  for (const auto& r : m.rirs) {
    std::ostringstream key;
    key.precision(17);
    key << r.room << r.rt60 << r.spec.source.transpose() << r.spec.mic.transpose();
    claim(placements, key.str(), r.split, "placement");
  }
}

void build_dataset(DatasetManifest& m, const fs::path& rirs_dir, const fs::path& dataset_dir) {
  std::map<std::string, RirFilter> cache;
  const auto rir = [&](const std::string& id) -> const RirFilter& {
    auto it = cache.find(id);
    if (it == cache.end()) it = cache.emplace(id, load_rir(rirs_dir, id, m.early_len)).first;
    return it->second;
  };
  for (auto& r : m.rirs) {
    const fs::path path = rirs_dir / (r.id + ".wav");
    if (fs::exists(path)) r.digest = signal_digest(read_wav(path).samples);
  }
  for (auto& e : m.entries) {
    if (!fs::exists(e.utterance)) throw DataError("missing utterance " + e.utterance);
    const Waveform s = read_wav(e.utterance);
    ReverbParts parts;
    if (e.scenario == "static") {
      parts = convolve_static(s, rir(e.source));
    } else {
      const SceneRecord& scene = find_scene(m, e.source);
      SceneScript script;
      script.switch_period = scene.switch_period;
      for (const auto& id : scene.rir_ids) script.rirs.push_back(rir(id));
      parts = convolve_time_varying(s, script);
    }
    const fs::path y_path = dataset_dir / e.reverberant_file;
    fs::create_directories(y_path.parent_path());
    write_wav(y_path, parts.y);
    write_wav(dataset_dir / e.early_file, parts.early);
    Fnv1a h;
    h.update(signal_digest(parts.y.samples));
    h.update(signal_digest(parts.early.samples));
    e.digest = h.hex();
  }
}

void save_manifest(const fs::path& path, const DatasetManifest& m) {
  Json rirs = Json::array(), scenes = Json::array(), entries = Json::array();
  for (const auto& r : m.rirs) rirs.push_back(rir_json(r));
  for (const auto& s : m.scenes) {
    scenes.push_back(
        {{"id", s.id}, {"room", s.room}, {"rt60", s.rt60}, {"rirs", s.rir_ids}, {"switch_period", s.switch_period}});
  }
  for (const auto& e : m.entries) {
    entries.push_back({{"id", e.id},
                       {"utterance", e.utterance},
                       {"split", e.split},
                       {"scenario", e.scenario},
                       {"source", e.source},
                       {"room", e.room},
                       {"rt60", e.rt60},
                       {"y", e.reverberant_file},
                       {"y_early", e.early_file},
                       {"digest", e.digest}});
  }
  const Json j = {{"seed", m.seed},
                  {"stft", {{"window_len", m.stft.window_len}, {"hop", m.stft.hop}, {"fft_len", m.stft.fft_len}}},
                  {"early_len", m.early_len},
                  {"rirs", rirs},
                  {"scenes", scenes},
                  {"entries", entries}};
  if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(1) << '\n';
}

DatasetManifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("missing dataset manifest " + path.string() + " (run `derev build-dataset` first)");
  try {
    const Json j = Json::parse(in);
    DatasetManifest m;
    m.seed = j.at("seed");
    m.stft.window_len = j.at("stft").at("window_len");
    m.stft.hop = j.at("stft").at("hop");
    m.stft.fft_len = j.at("stft").at("fft_len");
    m.early_len = j.at("early_len");
    for (const auto& r : j.at("rirs")) m.rirs.push_back(rir_from_json(r));
    for (const auto& s : j.at("scenes")) {
      m.scenes.push_back({s.at("id"), s.at("room"), s.at("rt60"), s.at("rirs"), s.at("switch_period")});
    }
    for (const auto& e : j.at("entries")) {
      m.entries.push_back({e.at("id"), e.at("utterance"), e.at("split"), e.at("scenario"), e.at("source"),
                           e.at("room"), e.at("rt60"), e.at("y"), e.at("y_early"), e.at("digest")});
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed manifest " + path.string() + ": " + e.what());
  }
}

std::pair<Waveform, Waveform> load_entry(const fs::path& dataset_dir, const DatasetEntry& e) {
  const fs::path y = dataset_dir / e.reverberant_file;
  if (!fs::exists(y)) throw DataError("missing example " + y.string() + " (run `derev build-dataset` first)");
  return {read_wav(y), read_wav(dataset_dir / e.early_file)};
}

std::string manifest_digest(const DatasetManifest& m) {
  Fnv1a h;
  for (const auto& e : m.entries) {
    h.update(e.id);
    h.update(e.digest);
  }
  return h.hex();
}

}  // namespace derev
